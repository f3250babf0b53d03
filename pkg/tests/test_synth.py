import numpy as np
import pytest

from epne.evaluate import DegenerateTaskError, node_task
from epne.synth import (EDGE_CLASSES, PERIODIC, STABLE, TREND, SynthSpec, pair_classes, periodic_on,
                        synth_periodic, synth_sbm)
from epne.temporal_graph import load_edge_list, static_edges


def presence(ds, cls):
    """Presence matrix (edges x T) for labelled edges of one class."""
    g = ds.graph
    mask = ds.edge_labels == cls
    pairs = ds.edge_pairs[mask]
    return np.array([[g.snapshot(t).has_edge(i, j) for t in range(1, g.T + 1)] for i, j in pairs], float)


def test_period_two_only_even_snapshots():
    ds = synth_periodic(SynthSpec(n=60, c=2, T=10, period=2, duty=0.5, seed=1))
    P = presence(ds, PERIODIC)
    assert P.sum() > 0
    # snapshot t is column t-1; t odd -> t % 2 = 1 -> off
    assert P[:, 0::2].sum() == 0


def test_rho_zero_gives_no_periodic_class():
    ds = synth_periodic(SynthSpec(n=60, c=2, rho=0.0, seed=2))
    assert PERIODIC not in set(ds.edge_labels.tolist())
    ds = synth_periodic(SynthSpec(n=60, c=2, rho=0.0, trend=0.0, seed=2))
    assert set(ds.edge_labels.tolist()) == {STABLE}


def test_deterministic_files(tmp_path):
    a = synth_periodic(SynthSpec(n=50, c=2, T=6, seed=3)).write(tmp_path / "a")
    b = synth_periodic(SynthSpec(n=50, c=2, T=6, seed=3)).write(tmp_path / "b")
    for key in a:
        assert open(a[key], "rb").read() == open(b[key], "rb").read()
    c = synth_periodic(SynthSpec(n=50, c=2, T=6, seed=4)).write(tmp_path / "c")
    assert open(a["edges"], "rb").read() != open(c["edges"], "rb").read()


def test_written_dataset_round_trips(tmp_path):
    ds = synth_periodic(SynthSpec(n=40, c=2, T=5, seed=5))
    paths = ds.write(tmp_path)
    g = load_edge_list(paths["edges"])
    assert g.T == 5
    for t in range(1, 6):
        ours = {tuple(sorted((ds.graph.node_names[i], ds.graph.node_names[j])))
                for i, j in ds.graph.snapshot(t).edges()}
        theirs = {tuple(sorted((g.node_names[i], g.node_names[j]))) for i, j in g.snapshot(t).edges()}
        assert ours == theirs
    rows = open(paths["edge_labels"]).read().splitlines()
    assert len(rows) == len(ds.edge_pairs)
    assert {r.split("\t")[2] for r in rows} <= set(EDGE_CLASSES)


def test_labels_attach_to_static_union():
    ds = synth_periodic(SynthSpec(n=80, c=4, seed=6))
    union = static_edges(ds.graph)
    assert all(union.has_edge(i, j) for i, j in ds.edge_pairs)
    comm = ds.communities
    assert (comm[ds.edge_pairs[:, 0]] == comm[ds.edge_pairs[:, 1]]).all()


def test_pair_class_rule():
    assert pair_classes(PERIODIC, STABLE) == PERIODIC
    assert pair_classes(TREND, PERIODIC) == PERIODIC
    assert pair_classes(TREND, STABLE) == TREND
    assert pair_classes(STABLE, STABLE) == STABLE
    assert [periodic_on(t, 4, 0.5) for t in range(1, 9)] == [True, False, False, True, True, False, False, True]


def test_periodic_autocorrelation_peaks_at_period():
    ds = synth_periodic(SynthSpec(n=120, c=2, T=24, period=4, seed=7))

    def mean_acf(P, lag):
        X = P - P.mean()
        return float((X[:, lag:] * X[:, :-lag]).mean())

    per, stab = presence(ds, PERIODIC), presence(ds, STABLE)
    flat = max(abs(mean_acf(stab, lag)) for lag in range(1, 8))
    peak = mean_acf(per, 4)
    assert peak >= 2 * flat
    assert peak == max(mean_acf(per, lag) for lag in range(1, 8))


def test_trend_edges_ramp_up():
    ds = synth_periodic(SynthSpec(n=120, c=2, T=24, seed=8))
    P = presence(ds, TREND)
    assert P[:, -6:].mean() > 2 * P[:, :6].mean()


def test_spec_validation():
    for bad in (dict(p_in=0.1, p_out=0.2), dict(period=1), dict(rho=1.5), dict(rho=0.8, trend=0.5)):
        with pytest.raises(ValueError):
            SynthSpec(**bad)


def test_low_degree_warns():
    with pytest.warns(RuntimeWarning, match="expected degree"):
        synth_sbm(20, 10, 0.1, 0.0, 2)


def test_sbm_components_follow_communities():
    ds = synth_sbm(60, 3, 0.4, 0.0, 2, seed=9)
    for t in (1, 2):
        for i, j in ds.graph.snapshot(t).edges():
            assert ds.communities[i] == ds.communities[j]


def test_sbm_edge_count_mean():
    n, c, p_in, p_out = 60, 3, 0.2, 0.02
    n_c = n // c
    expected = c * n_c * (n_c - 1) / 2 * p_in + (n * (n - 1) / 2 - c * n_c * (n_c - 1) / 2) * p_out
    counts = [synth_sbm(n, c, p_in, p_out, 1, seed=s).graph.snapshot(1).edge_count for s in range(100)]
    assert abs(np.mean(counts) / expected - 1) < 0.05


def test_single_community_is_degenerate_downstream():
    ds = synth_sbm(20, 1, 0.5, 0.0, 1, seed=0)
    rows = ds.node_label_rows()
    with pytest.raises(DegenerateTaskError):
        node_task(np.zeros((20, 2)), np.arange(20), [r[1] for r in rows])
