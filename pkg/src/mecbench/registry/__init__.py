from mecbench.registry.core import Registry, RegistryEntry, ServiceDescriptor, ServiceState

__all__ = ["Registry", "RegistryEntry", "ServiceDescriptor", "ServiceState"]
