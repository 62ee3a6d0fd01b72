"""Smoke test for the noe extension module."""

import json

import noe


def main():
    net, snap = noe.fixture("canonical")

    hull = noe.convex_hull([(0, 0), (1, 0), (0, 1), (0.2, 0.2)])
    assert len(hull) == 3, hull

    square = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    small = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
    ps = [p for p, _ in noe.minkowski_sum(square, small)]
    assert min(ps) == -1.5 and max(ps) == 1.5

    cap = json.loads(noe.compute(net, snap, "capability"))
    ps = [p for p, _ in cap["boundary"]]
    assert abs(min(ps) + 1.5) < 1e-9 and abs(max(ps) - 0.5) < 1e-9

    text = noe.compute(net, snap, "feasibility", k=10)
    doc = json.loads(text)
    assert len(doc["meta"]["statuses"]) == 24
    assert noe.boundary(text) == [tuple(v) for v in doc["boundary"]]

    ramp = json.loads(noe.compute(net, snap, "ramp", tau_s=30.0, k=4))
    assert ramp["frame"] == "deviation_from_dispatch"

    pts, diverged, violated = noe.monte_carlo(net, snap, 500, seed=3)
    assert len(pts) + diverged + violated == 500

    stack = json.loads(noe.bid_stack(net, snap, "long_dr", [27, 80, 325, 475], k=4))
    prices = [t["price_per_mwh"] for t in stack["tranches"]]
    assert prices == sorted(prices)

    try:
        noe.compute(net, snap, "ramp")
    except ValueError as e:
        assert "tau_s" in str(e)
    else:
        raise AssertionError("missing tau accepted")

    print("noe smoke test passed")


if __name__ == "__main__":
    main()
