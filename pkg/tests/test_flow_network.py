"""
流量网络测试：OD 聚合、节点/边/全图指标及其穷举对照
"""

from collections import Counter
from itertools import combinations

import numpy as np
import pandas as pd
import pytest

from src.flow_network import (TimeBucket, FlowGraph, bucket_range, assign_trips, aggregate_od,
                              aggregate_od_with_report, degree_centrality, node_strength, node_degrees,
                              betweenness, hop_matrix, shortest_path_length, edge_connectivity,
                              average_degree_connectivity, average_clustering, extract_network_features,
                              level_statistics, NETWORK_FEATURE_COLUMNS)
from src.exceptions import DegenerateGraphError, NodeLookupError, GraphDomainError


def random_graph(rng, n_max=8, p=None, weighted=True):
    n = int(rng.integers(2, n_max + 1))
    names = [f'v{i}' for i in range(n)]
    prob = p if p is not None else float(rng.uniform(0.1, 0.7))
    edges = {}
    for o in names:
        for d in names:
            if rng.random() < prob:
                edges[(o, d)] = int(rng.integers(1, 10)) if weighted else 1
    return FlowGraph.from_edges(edges, nodes=names)


def random_graphs(count, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    return [random_graph(rng, **kwargs) for _ in range(count)]


def plain_adjacency(g):
    n = g.n
    a = np.zeros((n, n), dtype=int)
    for (o, d) in g.edges:
        if o != d:
            a[g.index[o], g.index[d]] = 1
    return a


def floyd_warshall(a):
    n = len(a)
    inf = 10 ** 9
    dist = np.where(a == 1, 1, inf)
    np.fill_diagonal(dist, 0)
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return np.where(dist >= inf, -1, dist)


def path_counts(a, dist):
    """sigma[s, t]：按距离分层的最短路计数"""
    n = len(a)
    sigma = np.zeros((n, n))
    for s in range(n):
        sigma[s, s] = 1.0
        order = sorted((t for t in range(n) if dist[s, t] > 0), key=lambda t: dist[s, t])
        for t in order:
            sigma[s, t] = sum(sigma[s, u] for u in range(n) if a[u, t] and dist[s, u] == dist[s, t] - 1
                              and dist[s, u] >= 0)
    return sigma


def betweenness_oracle(g):
    a = plain_adjacency(g)
    n = g.n
    dist = floyd_warshall(a)
    sigma = path_counts(a, dist)
    node = np.zeros(n)
    edge = {}
    for v in range(n):
        for w in range(n):
            if a[v, w]:
                edge[(v, w)] = 0.0
    for s in range(n):
        for t in range(n):
            if s == t or dist[s, t] < 0:
                continue
            for v in range(n):
                if v not in (s, t) and dist[s, v] >= 0 and dist[v, t] >= 0 \
                        and dist[s, v] + dist[v, t] == dist[s, t]:
                    node[v] += sigma[s, v] * sigma[v, t] / sigma[s, t]
            for (v, w) in edge:
                if dist[s, v] >= 0 and dist[w, t] >= 0 and dist[s, v] + 1 + dist[w, t] == dist[s, t]:
                    edge[(v, w)] += sigma[s, v] * sigma[w, t] / sigma[s, t]
    node_norm = 1.0 / ((n - 1) * (n - 2)) if n >= 3 else 0.0
    edge_norm = 1.0 / (n * (n - 1))
    names = g.node_list
    return ({names[i]: node[i] * node_norm for i in range(n)},
            {(names[v], names[w]): x * edge_norm for (v, w), x in edge.items()})


def reachable(edges, s, t):
    seen, stack = {s}, [s]
    while stack:
        u = stack.pop()
        for (x, y) in edges:
            if x == u and y not in seen:
                seen.add(y)
                stack.append(y)
    return t in seen


def min_cut_by_removal(g, s, t):
    edges = [e for e in g.edges if e[0] != e[1]]
    for k in range(len(edges) + 1):
        for removed in combinations(edges, k):
            rest = [e for e in edges if e not in removed]
            if not reachable(rest, s, t):
                return k
    return len(edges)


class TestTimeBucket:
    def test_of_and_shift(self):
        b = TimeBucket.of(pd.Timestamp('2021-03-15T13:45:00Z'), 'monthly')
        assert b.start == pd.Timestamp('2021-03-01', tz='UTC')
        assert b.shift(1).start == pd.Timestamp('2021-04-01', tz='UTC')
        assert b.end == b.shift(1).start

    def test_misaligned_start(self):
        with pytest.raises(GraphDomainError):
            TimeBucket('daily', pd.Timestamp('2021-03-01T05:00:00Z'))

    def test_range(self):
        first = TimeBucket.of(pd.Timestamp('2021-03-01T22:00Z'), 'hourly')
        assert len(bucket_range(first, first.shift(5))) == 6


def trips_frame(rows):
    return pd.DataFrame(rows, columns=['start_ts', 'origin_x', 'origin_y', 'dest_x', 'dest_y']).assign(
        start_ts=lambda f: pd.to_datetime(f['start_ts'], utc=True))


class TestAggregation:
    def test_single_trip(self, nine_zone_partition):
        assigned = assign_trips(trips_frame([('2021-03-01T08:00Z', 0.5, 0.5, 1.5, 0.5)]), nine_zone_partition)
        graphs = aggregate_od(assigned, 'daily', 'quarters')
        (bucket, g), = graphs.items()
        assert bucket.start == pd.Timestamp('2021-03-01', tz='UTC')
        assert g.nodes == frozenset({'Q1', 'Q2'})
        assert g.edges == {('Q1', 'Q2'): 1}

    def test_all_pairs_with_self_loops(self, nine_zone_partition):
        centers = [(k % 3 + 0.5, k // 3 + 0.5) for k in range(9)]
        rows = [('2021-03-01T08:00Z', *o, *d) for o in centers for d in centers]
        g, = aggregate_od(assign_trips(trips_frame(rows), nine_zone_partition), 'daily', 'quarters').values()
        assert g.n == 9
        assert len(g.edges) == 81

    def test_counting_oracle(self, nine_zone_partition):
        rng = np.random.default_rng(5)
        n = 1000
        starts = pd.Timestamp('2021-03-01', tz='UTC') + pd.to_timedelta(rng.integers(0, 5 * 86400, n), unit='s')
        xy = rng.uniform(0.01, 2.99, size=(n, 4))
        frame = pd.DataFrame({'start_ts': starts, 'origin_x': xy[:, 0], 'origin_y': xy[:, 1],
                              'dest_x': xy[:, 2], 'dest_y': xy[:, 3]})
        assigned = assign_trips(frame, nine_zone_partition)
        expected = Counter((ts.floor('D'), o, d) for ts, o, d in
                           zip(frame['start_ts'], assigned['origin_zone'], assigned['dest_zone']))
        graphs = aggregate_od(assigned, 'daily', 'quarters')
        got = {(b.start, o, d): w for b, g in graphs.items() for (o, d), w in g.edges.items()}
        assert got == dict(expected)
        assert level_statistics(graphs)['total_trips'] == n

    def test_unassigned_dropped(self, nine_zone_partition):
        rows = [('2021-03-01T08:00Z', 0.5, 0.5, 9.0, 9.0), ('2021-03-01T09:00Z', 0.5, 0.5, 0.5, 0.5)]
        graphs, report = aggregate_od_with_report(assign_trips(trips_frame(rows), nine_zone_partition),
                                                  'hourly', 'quarters')
        assert report == {'trips': 2, 'dropped_unassigned': 1, 'aggregated': 1}
        assert len(graphs) == 1


class TestDegree:
    def test_star(self):
        g = FlowGraph.from_edges({('C', f'L{i}'): 1 for i in range(4)})
        assert degree_centrality(g, 'out')['C'] == 1.0
        assert all(degree_centrality(g, 'in')[f'L{i}'] == 0.25 for i in range(4))

    def test_isolated(self):
        g = FlowGraph.from_edges({('A', 'B'): 1}, nodes=['Z'])
        for direction in ('all', 'in', 'out'):
            assert degree_centrality(g, direction)['Z'] == 0.0

    def test_degenerate(self):
        with pytest.raises(DegenerateGraphError):
            degree_centrality(FlowGraph.from_edges({('A', 'A'): 3}))

    def test_enumeration_oracle(self):
        for g in random_graphs(200, seed=1):
            dc = {d: degree_centrality(g, d) for d in ('all', 'in', 'out')}
            for v in g.node_list:
                outs = {d for (o, d) in g.edges if o == v and d != v}
                ins = {o for (o, d) in g.edges if d == v and o != v}
                assert dc['out'][v] == pytest.approx(len(outs) / (g.n - 1), abs=1e-12)
                assert dc['in'][v] == pytest.approx(len(ins) / (g.n - 1), abs=1e-12)
                assert dc['all'][v] == pytest.approx(len(ins | outs) / (g.n - 1), abs=1e-12)


class TestStrength:
    def test_single_edge(self):
        s = node_strength(FlowGraph.from_edges({('A', 'B'): 7}))
        assert s['A'] == (0, 7)
        assert s['B'] == (7, 0)

    def test_self_loop(self):
        assert node_strength(FlowGraph.from_edges({('A', 'A'): 3}))['A'] == (3, 3)
        assert node_degrees(FlowGraph.from_edges({('A', 'A'): 3}))['A'] == (1, 1)

    def test_summation_oracle(self):
        for g in random_graphs(50, seed=2):
            s = node_strength(g)
            for v in g.node_list:
                assert s[v][0] == sum(w for (o, d), w in g.edges.items() if d == v)
                assert s[v][1] == sum(w for (o, d), w in g.edges.items() if o == v)


class TestBetweenness:
    def test_complete_digraph(self):
        nodes = 'ABCD'
        g = FlowGraph.from_edges({(o, d): 1 for o in nodes for d in nodes if o != d})
        assert all(v == 0.0 for v in betweenness(g, 'nodes').values())

    def test_directed_path(self):
        g = FlowGraph.from_edges({('a', 'b'): 1, ('b', 'c'): 1})
        assert betweenness(g, 'nodes') == {'a': 0.0, 'b': pytest.approx(0.5), 'c': 0.0}
        eb = betweenness(g, 'edges')
        assert eb[('a', 'b')] == pytest.approx(2 / 6)
        assert eb[('b', 'c')] == pytest.approx(2 / 6)

    def test_self_loop_edge_is_zero(self):
        eb = betweenness(FlowGraph.from_edges({('a', 'a'): 4, ('a', 'b'): 1}), 'edges')
        assert eb[('a', 'a')] == 0.0

    def test_bad_target(self):
        with pytest.raises(GraphDomainError):
            betweenness(FlowGraph.from_edges({('a', 'b'): 1}), 'faces')

    def test_path_counting_oracle(self):
        for g in random_graphs(200, seed=3):
            node_expected, edge_expected = betweenness_oracle(g)
            node_got = betweenness(g, 'nodes')
            edge_got = betweenness(g, 'edges')
            for v in g.node_list:
                assert abs(node_got[v] - node_expected[v]) <= 1e-9
            for e, x in edge_expected.items():
                assert abs(edge_got[e] - x) <= 1e-9


class TestShortestPath:
    def test_trivial_cases(self):
        g = FlowGraph.from_edges({('s', 't'): 1, ('t', 'u'): 1})
        assert shortest_path_length(g, 's', 's') == 0
        assert shortest_path_length(g, 's', 't') == 1
        assert shortest_path_length(g, 's', 'u') == 2
        assert shortest_path_length(g, 'u', 's') is None

    def test_unknown_node(self):
        with pytest.raises(NodeLookupError):
            shortest_path_length(FlowGraph.from_edges({('s', 't'): 1}), 's', 'x')

    def test_floyd_warshall_oracle(self):
        for g in random_graphs(200, seed=4):
            assert np.array_equal(hop_matrix(g), floyd_warshall(plain_adjacency(g)))


class TestEdgeConnectivity:
    def test_single_edge(self):
        assert edge_connectivity(FlowGraph.from_edges({('s', 't'): 9}), 's', 't') == 1

    def test_no_path(self):
        assert edge_connectivity(FlowGraph.from_edges({('t', 's'): 1}), 's', 't') == 0

    def test_same_node(self):
        with pytest.raises(GraphDomainError):
            edge_connectivity(FlowGraph.from_edges({('s', 't'): 1}), 's', 's')

    def test_subset_removal_oracle(self):
        for g in random_graphs(30, seed=5, n_max=5, p=0.4, weighted=False):
            for s in g.node_list:
                for t in g.node_list:
                    if s != t:
                        assert edge_connectivity(g, s, t) == min_cut_by_removal(g, s, t)


class TestGraphMetrics:
    def test_regular_graph(self):
        ring = ['a', 'b', 'c', 'd']
        edges = {}
        for i, v in enumerate(ring):
            edges[(v, ring[(i + 1) % 4])] = 1
            edges[(ring[(i + 1) % 4], v)] = 1
        assert average_degree_connectivity(FlowGraph.from_edges(edges)) == {4: 4.0}

    def test_isolated_node_has_no_entry(self):
        g = FlowGraph.from_edges({('a', 'b'): 1}, nodes=['z'])
        assert average_degree_connectivity(g) == {1: 1.0}

    def test_degree_connectivity_definition(self):
        for g in random_graphs(100, seed=6):
            a = plain_adjacency(g)
            deg = a.sum(axis=0) + a.sum(axis=1)
            per_k = {}
            for i in range(g.n):
                nbrs = [j for j in range(g.n) if j != i and (a[i, j] or a[j, i])]
                if nbrs:
                    per_k.setdefault(int(deg[i]), []).append(sum(deg[j] for j in nbrs) / len(nbrs))
            expected = {k: sum(v) / len(v) for k, v in per_k.items()}
            got = average_degree_connectivity(g)
            assert got.keys() == expected.keys()
            for k in expected:
                assert got[k] == pytest.approx(expected[k], abs=1e-12)

    def test_complete_triangle(self):
        g = FlowGraph.from_edges({(o, d): 1 for o in 'abc' for d in 'abc' if o != d})
        assert average_clustering(g) == pytest.approx(1.0)

    def test_directed_tree(self):
        g = FlowGraph.from_edges({('a', 'b'): 1, ('a', 'c'): 1, ('b', 'd'): 1})
        assert average_clustering(g) == 0.0

    def test_triangle_enumeration_oracle(self):
        for g in random_graphs(200, seed=7):
            a = plain_adjacency(g)
            n = g.n
            values = []
            for i in range(n):
                t = 0.5 * sum((a[i, j] + a[j, i]) * (a[i, h] + a[h, i]) * (a[j, h] + a[h, j])
                              for j in range(n) for h in range(n))
                d_tot = a[i].sum() + a[:, i].sum()
                d_bi = sum(a[i, j] * a[j, i] for j in range(n))
                denom = d_tot * (d_tot - 1) - 2 * d_bi
                values.append(t / denom if denom > 0 else 0.0)
            assert average_clustering(g) == pytest.approx(float(np.mean(values)), abs=1e-12)
            assert 0.0 <= average_clustering(g) <= 1.0


class TestRelabelling:
    """区域编号重排后，每个区域/每条边的指标不变"""

    @staticmethod
    def relabel(g, rng):
        names = g.node_list
        mapping = dict(zip(names, [f'z{k:02d}' for k in rng.permutation(len(names))]))
        return FlowGraph.from_edges({(mapping[o], mapping[d]): w for (o, d), w in g.edges.items()},
                                    nodes=mapping.values()), mapping

    def test_centralities_invariant(self):
        rng = np.random.default_rng(9)
        for g in random_graphs(60, seed=9):
            h, mapping = self.relabel(g, rng)
            for direction in ('all', 'in', 'out'):
                before, after = degree_centrality(g, direction), degree_centrality(h, direction)
                assert all(after[mapping[v]] == pytest.approx(before[v], abs=1e-12) for v in g.node_list)
            before, after = betweenness(g, 'nodes'), betweenness(h, 'nodes')
            assert all(after[mapping[v]] == pytest.approx(before[v], abs=1e-9) for v in g.node_list)
            before, after = betweenness(g, 'edges'), betweenness(h, 'edges')
            assert all(after[(mapping[o], mapping[d])] == pytest.approx(x, abs=1e-9)
                       for (o, d), x in before.items())
            assert node_strength(h) == {mapping[v]: s for v, s in node_strength(g).items()}

    def test_pair_and_graph_metrics_invariant(self):
        rng = np.random.default_rng(10)
        for g in random_graphs(40, seed=10):
            h, mapping = self.relabel(g, rng)
            for s in g.node_list:
                for t in g.node_list:
                    assert shortest_path_length(h, mapping[s], mapping[t]) == shortest_path_length(g, s, t)
                    if s != t:
                        assert edge_connectivity(h, mapping[s], mapping[t]) == edge_connectivity(g, s, t)
            assert average_clustering(h) == pytest.approx(average_clustering(g), abs=1e-12)
            assert average_degree_connectivity(h) == pytest.approx(average_degree_connectivity(g))


class TestNetworkFeatures:
    @pytest.fixture
    def hand_graph(self):
        return FlowGraph.from_edges({('A', 'B'): 5, ('B', 'C'): 2, ('C', 'A'): 1, ('A', 'C'): 3, ('C', 'D'): 1})

    def test_columns(self, hand_graph):
        frame = extract_network_features(hand_graph, [('A', 'B')])
        assert list(frame.columns) == NETWORK_FEATURE_COLUMNS

    def test_present_edge(self, hand_graph):
        row = extract_network_features(hand_graph, [('A', 'B')]).iloc[0]
        assert row['previous_count'] == 5
        assert row['edge_present'] == 1
        assert row['edge_connectivity'] == edge_connectivity(hand_graph, 'A', 'B') == 1
        assert row['shortest_path_length'] == 1
        assert row['edge_betweenness'] == pytest.approx(betweenness(hand_graph, 'edges')[('A', 'B')])
        assert row['orig_strength_out'] == 8
        assert row['dest_strength_in'] == 5
        assert row['orig_betweenness'] == pytest.approx(betweenness(hand_graph, 'nodes')['A'])
        assert row['num_nodes'] == 4
        assert row['num_edges'] == 5
        assert row['average_clustering'] == pytest.approx(average_clustering(hand_graph))

    def test_absent_edge(self, hand_graph):
        row = extract_network_features(hand_graph, [('B', 'A')]).iloc[0]
        assert row['previous_count'] == 0
        assert row['edge_betweenness'] == 0.0
        assert row['edge_connectivity'] == 0
        assert row['shortest_path_length'] == 2
        assert row['unreachable'] == 0

    def test_self_pair_and_unreachable(self, hand_graph):
        frame = extract_network_features(hand_graph, [('A', 'A'), ('D', 'A'), ('A', 'E')])
        assert frame.loc[0, 'shortest_path_length'] == 0
        assert frame.loc[0, 'edge_connectivity'] == 0
        assert frame.loc[1, 'shortest_path_length'] == 4
        assert frame.loc[1, 'unreachable'] == 1
        assert frame.loc[2, 'dest_in_degree'] == 0
        assert frame.loc[2, 'unreachable'] == 1

    def test_connectivity_bound_for_large_graphs(self, hand_graph):
        row = extract_network_features(hand_graph, [('A', 'C')], exact_max_nodes=2).iloc[0]
        assert row['connectivity_exact'] == 0
        assert row['edge_connectivity'] == min(2, 2)

    def test_missing_previous_graph(self):
        row = extract_network_features(None, [('A', 'B')]).iloc[0]
        assert row['num_nodes'] == 0
        assert row['previous_count'] == 0
        assert row['unreachable'] == 1
