"""Seeded random small instances for cross-checking the solvers."""
from __future__ import annotations

import random

from .topology import (PhysicalLink, PhysicalNode, PhysicalTopology, Plane, SliceRequest,
                       VirtualLink, Vnf)


def random_topology(rng: random.Random, n_nodes: int) -> PhysicalTopology:
    ids = [f"n{i}" for i in range(n_nodes)]
    nodes = []
    for nid in ids:
        cap = rng.choice([2.0, 3.0, 4.0, 6.0, 10.0])
        preload = rng.choice([0.0, 0.0, 0.0, round(rng.uniform(0.2, 1.5), 3)])
        nodes.append(PhysicalNode(nid, cap, min(preload, cap),
                                  rng.choice([0.0, 0.5, round(rng.uniform(0.1, 1.0), 3)])))
    pairs = []
    for i in range(1, n_nodes):  # random spanning tree keeps the graph connected
        pairs.append((ids[rng.randrange(i)], ids[i]))
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if (ids[i], ids[j]) not in pairs and (ids[j], ids[i]) not in pairs and rng.random() < 0.4:
                pairs.append((ids[i], ids[j]))
    links = []
    for a, b in pairs:
        cap = rng.choice([15.0, 25.0, 100.0])
        alloc = rng.choice([0.0, 0.0, round(rng.uniform(0, cap * 0.6), 3)])
        links.append(PhysicalLink((a, b), cap, alloc, rng.choice([0.15, round(rng.uniform(0.05, 1.0), 3)]),
                                  rng.choice([16.85, round(rng.uniform(0.0, 20.0), 3)])))
    return PhysicalTopology(tuple(nodes), tuple(links))


def random_slice(rng: random.Random, sid: str, n_vnfs: int = 3, k_rel: int | None = None,
                 gamma: tuple[int, int] | None = None) -> SliceRequest:
    vnfs = []
    for j in range(n_vnfs):
        plane = Plane.CONTROL if rng.random() < 0.7 else Plane.DATA
        vnfs.append(Vnf(f"{sid}v{j}", plane, round(rng.uniform(0.4, 1.4), 3),
                        round(rng.uniform(0.1, 1.0), 3)))
    vlinks = [VirtualLink(vnfs[j].id, vnfs[j + 1].id, round(rng.uniform(5, 12), 3))
              for j in range(n_vnfs - 1)]
    if n_vnfs > 2 and rng.random() < 0.3:
        vlinks.append(VirtualLink(vnfs[-1].id, vnfs[0].id, round(rng.uniform(5, 12), 3)))
    kc = k_rel if k_rel is not None else rng.randint(1, 3)
    kd = k_rel if k_rel is not None else rng.randint(1, 3)
    gc, gd = gamma if gamma is not None else (int(rng.random() < 0.2), int(rng.random() < 0.2))
    base = sum(v.vnf_processing_delay_ms for v in vnfs)
    budget = round(base + rng.uniform(1.0, 40.0), 3)
    return SliceRequest(sid, tuple(vnfs), tuple(vlinks), budget, kc, kd, gc, gd, 10.0)


def random_instance(seed: int, max_nodes: int = 4, max_slices: int = 3):
    """Topology with 2..max_nodes nodes and 1..max_slices three-VNF slices."""
    rng = random.Random(seed)
    topology = random_topology(rng, rng.randint(2, max_nodes))
    slices = [random_slice(rng, f"s{i}") for i in range(rng.randint(1, max_slices))]
    return topology, slices
