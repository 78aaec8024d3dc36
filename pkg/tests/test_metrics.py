import pytest

from reactive_overhead.metrics import MetricsReport, literal_delay, routing_load, throughput


def report(**kw):
    r = MetricsReport(duration=kw.pop("duration", 10.0))
    tx = kw.pop("tx", {})
    r.tx.update(tx)
    for k, v in kw.items():
        setattr(r, k, v)
    return r


def test_throughput_examples():
    assert throughput(report(delivered_bytes=2560)) == 256.0
    assert throughput(report()) == 0.0
    assert throughput(report(delivered_bytes=2560, duration=20)) == 128.0


def test_throughput_needs_positive_duration():
    with pytest.raises(ValueError):
        throughput(report(duration=0))


def test_delay_forms():
    r = report(generated=5, delivered=4, latencies=[0.1, 0.2, 0.3, 0.2], delivered_bytes=4).finalize()
    assert r.e2e_delay_mean == pytest.approx(0.2)
    # 5 sent * (2 * 0.2) / 4 received
    assert r.e2e_delay_literal == pytest.approx(0.5)
    assert literal_delay(4, 0.25, 4) == 0.25
    assert literal_delay(4, 0.25, 0) is None


def test_routing_load_forms():
    r = report(generated=40, delivered=20, tx={"RREQ": 30, "RREP": 10, "HELLO": 10, "DATA": 100})
    nrl, literal = routing_load(r)
    assert nrl == 2.5
    # 50 routing + 100 DATA transmissions - 40 sent at sources
    assert literal == 110.0
    assert routing_load(report(tx={"RREQ": 60, "DATA": 40}, generated=40))[1] == 60.0


def test_undefined_when_nothing_delivered():
    r = report(generated=3, dropped=3, tx={"RREQ": 4}).finalize()
    assert r.nrl_conventional is None
    assert r.e2e_delay_mean is None and r.e2e_delay_literal is None
    assert r.delivery_ratio == 0.0
    # 4 routing + 0 DATA transmissions - 3 sent at sources
    assert r.routing_load_literal == 1.0


def test_check_catches_broken_accounting():
    with pytest.raises(AssertionError):
        report(generated=3, delivered=1, latencies=[0.1]).check()
    with pytest.raises(AssertionError):
        report(generated=1, delivered=2, latencies=[0.1, 0.1]).check()
    report(generated=3, delivered=1, dropped=1, in_flight=1, latencies=[0.1]).check()


def test_metrics_mapping_has_six_entries():
    r = report(generated=2, delivered=2, latencies=[0.1, 0.1], delivered_bytes=1024).finalize()
    m = r.metrics()
    assert list(m) == ["throughput", "delivery_ratio", "e2e_delay_mean", "e2e_delay_literal",
                       "nrl_conventional", "routing_load_literal"]
    assert m["throughput"] == 102.4 and m["delivery_ratio"] == 1.0
