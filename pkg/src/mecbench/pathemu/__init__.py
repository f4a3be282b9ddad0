from mecbench.pathemu.profile import LinkScope, PathProfile, transfer_time
from mecbench.pathemu.proxy import PathProxy, proxy_listen
from mecbench.pathemu.scheduler import LinkScheduler, replay

__all__ = ["LinkScope", "LinkScheduler", "PathProfile", "PathProxy", "proxy_listen", "replay", "transfer_time"]
