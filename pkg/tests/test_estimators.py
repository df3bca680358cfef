import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mutualbot.detector import DetectorConfig, classify_community
from mutualbot.estimators import BotnetDetector, LouvainCommunities, MutualContacts
from mutualbot.graph import ContactMap, build_mcm, expire_contacts, record_contacts
from mutualbot.louvain import communities, louvain
from mutualbot.traffic import WorldConfig, build_world, step


def rows(seed=1, rounds=4, ticks=15):
    w = build_world(WorldConfig(rng_seed=seed))
    return [(1 + t // ticks, s, d) for t in range(rounds * ticks) for s, d in step(w, t)]


def batch_graph(data, window):
    cmap = ContactMap()
    for r in sorted({row[0] for row in data}):
        cmap = record_contacts(cmap, [(s, d) for rr, s, d in data if rr == r], r)
        cmap, _ = expire_contacts(cmap, r, window)
    return build_mcm(cmap)


def test_mutual_contacts_matches_batch_build():
    data = rows(rounds=7)
    est = MutualContacts(window=2).fit(data)
    assert est.graph_ == batch_graph(data, 2)
    assert est.last_round_ == 7


def test_partial_fit_equals_fit():
    data = rows()
    a = MutualContacts().fit(data)
    b = MutualContacts()
    for r in range(1, 5):
        b.partial_fit([row for row in data if row[0] == r])
    assert a.graph_ == b.graph_
    with pytest.raises(ValueError):
        b.partial_fit([(2, "10.0.0.1", "10.0.0.2")])


def test_transform_is_symmetric_sparse_matrix():
    est = MutualContacts()
    X = est.fit_transform(rows())
    assert X.shape == (len(est.hosts_),) * 2
    assert (X != X.T).nnz == 0
    assert X.diagonal().sum() == 0
    i, j = est.hosts_.index(est.graph_.edge_triples()[0][0]), est.hosts_.index(est.graph_.edge_triples()[0][1])
    assert X[i, j] == est.graph_.edge_triples()[0][2]
    assert X.sum() == 2 * est.graph_.total_weight()


def test_mutual_contacts_validation():
    with pytest.raises(ValueError):
        MutualContacts(window=0).fit(rows())
    with pytest.raises(ValueError):
        MutualContacts().fit([("10.0.0.1", "10.0.0.2")])
    with pytest.raises(NotFittedError):
        MutualContacts().transform()


def test_louvain_estimator():
    g = MutualContacts().fit(rows()).graph_
    est = LouvainCommunities().fit(g)
    assert est.partition_ == louvain(g)
    assert list(est.labels_) == [est.partition_[v] for v in est.vertices_]
    assert np.array_equal(LouvainCommunities().fit_predict(g), est.labels_)
    assert est.modularity_ > 0
    # seeding can only keep or refine the partition; a refined one is a fixpoint
    seeded = LouvainCommunities().fit(g, seed=est.partition_)
    assert seeded.modularity_ >= est.modularity_ - 1e-12
    again = LouvainCommunities().fit(g, seed=seeded.partition_)
    assert again.partition_ == seeded.partition_
    with pytest.raises(TypeError):
        LouvainCommunities().fit(np.eye(3))


def test_botnet_detector_matches_function():
    g = MutualContacts().fit(rows(rounds=8)).graph_
    comms = list(communities(louvain(g)).values())
    det = BotnetDetector(theta=5.0, rho="auto").fit(g)
    cfg = DetectorConfig()
    assert list(det.predict(comms)) == [classify_community(c, g, cfg).value for c in comms]
    assert "botnet" in det.predict(comms)
    assert det.decision_function(comms).shape == (len(comms),)


def test_botnet_detector_params_and_errors():
    det = BotnetDetector(theta=3.0, rho=12.0)
    assert det.get_params() == {"theta": 3.0, "phi": 0.5, "rho": 12.0, "rho_sigmas": 2.5}
    assert clone(det).get_params() == det.get_params()
    with pytest.raises(NotFittedError):
        det.predict([{"10.0.0.1"}])
    g = MutualContacts().fit(rows()).graph_
    det.fit(g)
    assert det.rho_ == 12.0
    with pytest.raises(ValueError):
        det.predict([{"192.0.2.1"}])
    with pytest.raises(ValueError):
        det.predict([set()])
    with pytest.raises(ValueError):
        BotnetDetector(theta=-1).fit(g)
