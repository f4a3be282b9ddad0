import pytest

from mecbench.calibration import REFERENCE_TARGETS, fit_cloud, fit_edge, predict
from mecbench.errors import ParseError, ValidationError
from mecbench.pathemu import LinkScope
from mecbench.scenario.config import bundled_suite, load_config, parse_suite

MINIMAL = """
[path p]
one_way_ms = 5
[scenario A]
mode = cloud
path = p
service_ms = 10
"""


def test_minimal_suite_defaults():
    suite = parse_suite(MINIMAL)
    (a,) = suite.scenarios
    assert (a.devices, a.samples_per_device, a.frames, a.encoding.value) == (1, 100, "synthetic", "raw")
    assert a.path.bandwidth_mbps is None and a.path.scope is LinkScope.CONNECTION
    assert suite.comparisons == []


def test_syntax_errors_are_parse_errors():
    with pytest.raises(ParseError):
        parse_suite("[suite\nseed = 1")
    with pytest.raises(ParseError):
        parse_suite("orphan = 1\n")
    with pytest.raises(ParseError):
        load_config("/nonexistent/file.suite")


def test_validation_lists_every_violation():
    text = MINIMAL.replace("service_ms = 10", "service_ms = 10\ndevices = 0\nsamples = 1\nbogus = 3")
    text += "\n[suite]\ncomparisons = A -> Z, nonsense\n[widget x]\n"
    with pytest.raises(ValidationError) as info:
        parse_suite(text)
    joined = "\n".join(info.value.violations)
    for needle in ("devices", "samples", "bogus: unknown key", "unknown scenario 'Z'", "nonsense", "[widget x]"):
        assert needle in joined
    assert len(info.value.violations) >= 6


@pytest.mark.parametrize(
    "old, new",
    [
        ("mode = cloud", "mode = fog"),
        ("path = p", "path = nope"),
        ("service_ms = 10", "service_ms = fast"),
        ("service_ms = 10", "service_ms = 10\nencoding = gif"),
        ("service_ms = 10", "service_ms = 10\nthreshold = 300"),
        ("mode = cloud", "devices = 1"),
    ],
)
def test_bad_values(old, new):
    with pytest.raises(ValidationError):
        parse_suite(MINIMAL.replace(old, new))


def test_path_errors():
    with pytest.raises(ValidationError):
        parse_suite(MINIMAL.replace("one_way_ms = 5", "one_way_ms = 5\njitter_ms = 9"))
    with pytest.raises(ValidationError):
        parse_suite(MINIMAL.replace("one_way_ms = 5", "bandwidth_mbps = fast"))


def test_bundled_suite():
    suite = load_config(bundled_suite())
    assert [s.name for s in suite.scenarios] == ["Cloud1", "Cloud2", "MEC1", "MEC2"]
    assert suite.comparisons == [("Cloud1", "MEC1"), ("Cloud2", "MEC2")]
    assert [s.devices for s in suite.scenarios] == [1, 2, 1, 2]
    assert all(s.samples_per_device == 100 for s in suite.scenarios)
    for s in suite.scenarios:
        assert s.service_ms == REFERENCE_TARGETS[s.name].service_ms
    assert suite.scenario("Cloud2").path.scope is LinkScope.SHARED
    assert suite.scenario("MEC2").path.scope is LinkScope.CONNECTION


# --- calibration -------------------------------------------------------------

PAYLOAD = 91_734.0
OVERHEAD = 0.34


def test_shipped_profiles_follow_from_the_fit():
    suite = load_config(bundled_suite())
    edge, cloud = fit_edge(PAYLOAD, OVERHEAD), fit_cloud(PAYLOAD, OVERHEAD)
    assert suite.scenario("MEC1").path.one_way_delay_ms == edge.profile.one_way_delay_ms == 41.0
    assert suite.scenario("MEC1").path.bandwidth_mbps == pytest.approx(edge.profile.bandwidth_mbps, abs=0.01)
    assert suite.scenario("Cloud1").path.one_way_delay_ms == pytest.approx(cloud.profile.one_way_delay_ms, abs=0.11)
    assert suite.scenario("Cloud1").path.bandwidth_mbps == pytest.approx(cloud.profile.bandwidth_mbps, abs=0.01)


def test_fit_quality_and_ordering():
    edge, cloud = fit_edge(PAYLOAD, OVERHEAD), fit_cloud(PAYLOAD, OVERHEAD)
    assert edge.worst_relative_error < 0.07 and cloud.worst_relative_error < 0.07
    assert cloud.profile.one_way_delay_ms >= 1.2 * edge.profile.one_way_delay_ms - 1e-9
    for name, fit in (("MEC1", edge), ("MEC2", edge), ("Cloud1", cloud), ("Cloud2", cloud)):
        target = REFERENCE_TARGETS[name]
        assert fit.predicted[name] == pytest.approx(target.response_ms, rel=0.07)


def test_predict_model():
    t = REFERENCE_TARGETS["Cloud2"]
    one = predict(t, 50, 1.0, 125_000, shared=False)
    two = predict(t, 50, 1.0, 125_000, shared=True)
    assert one == pytest.approx(100 + 287.8 + 1000) and two == pytest.approx(100 + 287.8 + 2000)
