"""Leave-one-out relative impact and the condensed local-impact kNN graph.

The impact of training instance v on instance x is the absolute change in
x's predicted positive-class probability when the model is retrained
without v. The graph condenses the poisoned dataset's kNN structure to the
attack's principal actors (target, poisons, innocents) plus their nearest
neighbors, attaching impacts to the edges.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

import numpy as np

from .data import Dataset
from .classifier import LogisticRegressionGD, ModelConfig, train
from .attacks import AttackResult

NODE_TARGET = "Target"
NODE_POISON = "Poison"
NODE_INNOCENT = "Innocent"
NODE_CONTEXT = "Context"


def relative_impact(
    poisoned_dataset: Dataset,
    removed_id: int,
    probe_id: int,
    model_config: ModelConfig,
    baseline_probability: float,
) -> float:
    """|p' - p| for the probe when the removed instance leaves the training set.

    The baseline is the probe's positive-class probability under the model
    trained on the full poisoned dataset; p' comes from retraining with the
    same config minus the removed instance.
    """
    if removed_id == probe_id:
        raise ValueError("removed and probe instances must differ")
    reduced = poisoned_dataset.without_row(poisoned_dataset.row_of(removed_id))
    retrained = train(reduced, model_config)
    probe = poisoned_dataset.X[poisoned_dataset.row_of(probe_id)]
    p_prime = float(retrained.positive_proba(probe.reshape(1, -1))[0])
    return abs(p_prime - baseline_probability)


@dataclass(frozen=True)
class LocalImpactNode:
    """One graph node with its ring encodings.

    inner_ring (Target/Innocent only): stored-label class counts over the k
    nearest pre-attack, non-poisoned neighbors. outer_ring (every node):
    {negative, positive, poison} counts over the k nearest neighbors in the
    poisoned dataset. poisoned_probability is the poisoned model's
    confidence in its own predicted label for this node.
    """

    instance_id: int
    node_type: str
    victim_prediction: int
    poisoned_prediction: int
    poisoned_probability: float
    flipped: bool
    inner_ring: dict[str, int] | None
    outer_ring: dict[str, int]
    total_outgoing_impact: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ImpactEdge:
    """Directed kNN edge: source is a k-nearest neighbor of the destination.

    impact is present only when an endpoint is a target, poison, or
    innocent node; context-to-context edges carry none.
    """

    source: int
    destination: int
    impact: float | None

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.destination, "impact": self.impact}


@dataclass(frozen=True)
class ConnectorEdge:
    """Undirected minimum-distance link joining two graph components."""

    source: int
    destination: int
    distance: float

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.destination, "distance": self.distance}


@dataclass(frozen=True)
class LocalImpactGraph:
    nodes: tuple[LocalImpactNode, ...]
    edges: tuple[ImpactEdge, ...]
    connector_edges: tuple[ConnectorEdge, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
            "connectors": [c.to_dict() for c in self.connector_edges],
        }


def _knn_rows(X: np.ndarray, row: int, k: int) -> np.ndarray:
    """Rows of the k nearest neighbors of X[row], self excluded.

    Ties resolve to the lower row index (stable argsort), keeping the graph
    deterministic.
    """
    distances = np.linalg.norm(X - X[row], axis=1)
    order = np.argsort(distances, kind="stable")
    return order[order != row][:k]


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def build_local_impact_graph(
    victim_dataset: Dataset,
    result: AttackResult,
    k: int,
    model_config: ModelConfig,
) -> LocalImpactGraph:
    """Condensed kNN graph around the target, poisons, and innocents.

    Nodes are those instances plus their k nearest neighbors in the
    poisoned dataset. Every node contributes directed edges from its k
    nearest neighbors that are also in the node set; edges touching a
    target/poison/innocent node carry the leave-one-out impact of the
    source on the destination (one retrain per distinct source). Connector
    edges greedily join the closest pairs of disconnected components.
    """
    poisoned = result.poisoned_dataset
    if not 1 <= k < victim_dataset.n:
        raise ValueError(f"k must be in [1, {victim_dataset.n - 1}], got {k}")

    poison_ids = {p.id for p in result.poisons}
    innocent_ids = set(result.innocents)
    core_ids = {result.target_id} | poison_ids | innocent_ids

    id_to_row = {int(poisoned.ids[r]): r for r in range(poisoned.n)}
    neighbor_rows = {
        instance_id: _knn_rows(poisoned.X, row, k) for instance_id, row in id_to_row.items()
    }

    node_ids = set(core_ids)
    for instance_id in sorted(core_ids):
        node_ids.update(int(poisoned.ids[r]) for r in neighbor_rows[instance_id])

    def node_type(instance_id: int) -> str:
        if instance_id == result.target_id:
            return NODE_TARGET
        if instance_id in poison_ids:
            return NODE_POISON
        if instance_id in innocent_ids:
            return NODE_INNOCENT
        return NODE_CONTEXT

    edges_wanting_impact: list[tuple[int, int]] = []
    plain_edges: list[tuple[int, int]] = []
    for destination in sorted(node_ids):
        for r in neighbor_rows[destination]:
            source = int(poisoned.ids[r])
            if source not in node_ids:
                continue
            if node_type(source) == NODE_CONTEXT and node_type(destination) == NODE_CONTEXT:
                plain_edges.append((source, destination))
            else:
                edges_wanting_impact.append((source, destination))

    # one retrain per distinct source serves all of its outgoing edges
    poisoned_model = result.poisoned_model
    baselines = {
        probe: float(
            poisoned_model.positive_proba(poisoned.X[id_to_row[probe]].reshape(1, -1))[0]
        )
        for probe in sorted({d for _, d in edges_wanting_impact})
    }
    impacts: dict[tuple[int, int], float] = {}
    by_source: dict[int, list[int]] = {}
    for source, destination in edges_wanting_impact:
        by_source.setdefault(source, []).append(destination)
    for source in sorted(by_source):
        reduced = poisoned.without_row(id_to_row[source])
        retrained = train(reduced, model_config)
        for destination in by_source[source]:
            probe = poisoned.X[id_to_row[destination]]
            p_prime = float(retrained.positive_proba(probe.reshape(1, -1))[0])
            impacts[(source, destination)] = abs(p_prime - baselines[destination])

    edges = tuple(
        ImpactEdge(source=s, destination=d, impact=impacts.get((s, d)))
        for s, d in sorted(edges_wanting_impact + plain_edges)
    )

    outgoing_totals: dict[int, float] = {}
    for (source, _), impact in impacts.items():
        outgoing_totals[source] = outgoing_totals.get(source, 0.0) + impact

    victim_rows = {int(victim_dataset.ids[r]): r for r in range(victim_dataset.n)}
    original_neighbor_rows = {
        instance_id: _knn_rows(victim_dataset.X, row, k)
        for instance_id, row in victim_rows.items()
    }

    nodes = []
    for instance_id in sorted(node_ids):
        row = id_to_row[instance_id]
        vec = poisoned.X[row].reshape(1, -1)
        victim_pred = int(result.victim_model.predict(vec)[0])
        poisoned_pred = int(poisoned_model.predict(vec)[0])
        p_pos = float(poisoned_model.positive_proba(vec)[0])
        confidence = p_pos if poisoned_pred == 1 else 1.0 - p_pos
        kind = node_type(instance_id)

        inner_ring = None
        if kind in (NODE_TARGET, NODE_INNOCENT):
            rows = original_neighbor_rows[instance_id]
            labels = victim_dataset.y[rows]
            inner_ring = {
                "negative": int(np.sum(labels == -1)),
                "positive": int(np.sum(labels == 1)),
            }

        outer = {"negative": 0, "positive": 0, "poison": 0}
        for r in neighbor_rows[instance_id]:
            if int(poisoned.ids[r]) in poison_ids:
                outer["poison"] += 1
            elif int(poisoned.y[r]) == 1:
                outer["positive"] += 1
            else:
                outer["negative"] += 1

        nodes.append(
            LocalImpactNode(
                instance_id=instance_id,
                node_type=kind,
                victim_prediction=victim_pred,
                poisoned_prediction=poisoned_pred,
                poisoned_probability=confidence,
                flipped=victim_pred != poisoned_pred,
                inner_ring=inner_ring,
                outer_ring=outer,
                total_outgoing_impact=outgoing_totals.get(instance_id, 0.0)
                if kind == NODE_POISON
                else None,
            )
        )

    connector_edges = _connect_components(
        sorted(node_ids), [(e.source, e.destination) for e in edges], poisoned, id_to_row
    )
    return LocalImpactGraph(
        nodes=tuple(nodes), edges=edges, connector_edges=tuple(connector_edges)
    )


def _connect_components(
    node_ids: list[int],
    edge_pairs: list[tuple[int, int]],
    poisoned: Dataset,
    id_to_row: dict[int, int],
) -> list[ConnectorEdge]:
    """Greedy minimum-distance joins until the graph is one component."""
    components = _UnionFind(node_ids)
    for source, destination in edge_pairs:
        components.union(source, destination)
    connectors: list[ConnectorEdge] = []
    while True:
        roots = {components.find(i) for i in node_ids}
        if len(roots) <= 1:
            break
        best: tuple[float, int, int] | None = None
        for i, a in enumerate(node_ids):
            for b in node_ids[i + 1 :]:
                if components.find(a) == components.find(b):
                    continue
                distance = float(
                    np.linalg.norm(poisoned.X[id_to_row[a]] - poisoned.X[id_to_row[b]])
                )
                if best is None or distance < best[0]:
                    best = (distance, a, b)
        assert best is not None
        connectors.append(ConnectorEdge(source=best[1], destination=best[2], distance=best[0]))
        components.union(best[1], best[2])
    return connectors
