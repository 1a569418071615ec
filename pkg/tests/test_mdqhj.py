import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.grid_core import ArgumentError, GridParseError, IndexSet
from app.f2_subspace import spiral_basis
from app.pair_search import find_line, find_rect_pair, point_set_from_subspace
from app.mdqhj import (
    CombSubspaceSpec,
    KString,
    KStringSet,
    block_bipartition,
    bipartition,
    count_square_lines_exhaustive,
    count_square_subspaces_exhaustive,
    counting_lemma_holds,
    decode_indices,
    find_square_lines,
    format_kstring,
    good_fraction,
    good_strings,
    grid_domain,
    induction_demo,
    instantiations,
    kstring_set_from_point_set,
    line_to_spec,
    make_spec,
    parse_kstring,
    random_bipartition,
    random_kstring_set,
    rect_domain,
    slice_decompose,
    spec_from_json,
    spec_to_json,
    subspace_count_bound,
    subspace_product,
    verify_subspace_in_set,
)


def kstring(k, coords, letters):
    return KString(k, tuple(coords), tuple(letters))


class TestDomains:
    def test_grid_and_rect(self):
        assert grid_domain(2) == ((1, 1), (1, 2), (2, 1), (2, 2))
        assert len(rect_domain(2, 4)) == 8

    def test_block(self):
        part = block_bipartition(grid_domain(3), 2)
        assert part.P == ((1, 1), (1, 2), (2, 1), (2, 2))
        assert len(part.Q) == 5

    @given(st.integers(0, 10 ** 6))
    def test_random_bipartition_is_exact(self, seed):
        domain = rect_domain(2, 4)
        part = random_bipartition(domain, seed)
        assert part.P and part.Q
        assert sorted(part.P + part.Q) == sorted(domain)

    def test_foreign_cells_rejected(self):
        with pytest.raises(ArgumentError):
            bipartition(grid_domain(2), [(3, 3)])


class TestKStrings:
    def test_text_round_trip(self):
        s = parse_kstring("012\n210\n001\n", 3)
        assert s.letters == (0, 1, 2, 2, 1, 0, 0, 0, 1)
        assert format_kstring(s) == "012\n210\n001\n"

    def test_letter_out_of_alphabet(self):
        with pytest.raises(GridParseError) as info:
            parse_kstring("01\n20\n", 2)
        assert (info.value.line, info.value.column) == (2, 1)

    def test_set_deduplicates(self):
        coords = grid_domain(2)
        E = KStringSet(2, coords, np.array([[0, 1, 1, 0], [0, 1, 1, 0], [1, 1, 1, 1]]))
        assert len(E) == 2
        assert kstring(2, coords, [1, 1, 1, 1]) in E
        assert (0, 0, 0, 0) not in E

    @pytest.mark.parametrize("k", [1, 257, 1000])
    def test_alphabet_bounds(self, k):
        coords = grid_domain(1)
        with pytest.raises(ArgumentError):
            KStringSet(k, coords, np.zeros((1, 1), dtype=np.int64))
        with pytest.raises(ArgumentError):
            KString(k, coords, (0,))

    def test_largest_alphabet_keeps_letters(self):
        coords = grid_domain(1)
        E = KStringSet(256, coords, np.array([[255], [0]]))
        assert len(E) == 2
        assert (255,) in E
        assert decode_indices(np.array([255]), 256, 1).tolist() == [[255]]
        with pytest.raises(ArgumentError):
            decode_indices(np.array([256]), 257, 1)

    def test_negative_letters_rejected(self):
        with pytest.raises(ArgumentError):
            KStringSet(3, grid_domain(1), np.array([[-1]]))

    def test_universe_size(self):
        assert len(KStringSet.universe(3, rect_domain(2, 2))) == 81

    def test_random_set_is_seeded(self):
        a = random_kstring_set(3, grid_domain(2), 40, seed=4)
        b = random_kstring_set(3, grid_domain(2), 40, seed=4)
        assert len(a) == 40
        assert np.array_equal(a.matrix, b.matrix)

    def test_point_set_bridge(self):
        S = point_set_from_subspace(spiral_basis(3))
        E = kstring_set_from_point_set(S)
        assert len(E) == 128
        assert E.k == 2
        assert (0,) * 9 in E


class TestSlices:
    def test_full_universe_all_dense(self):
        E = KStringSet.universe(2, grid_domain(2))
        table = slice_decompose(E, [(1, 1)])
        assert all(d == 1 for d in table.rows.values())
        assert good_strings(table, 1) == set(table.counts)

    def test_empty_set(self):
        E = KStringSet(2, grid_domain(2), np.zeros((0, 4), dtype=np.uint8))
        table = slice_decompose(E, [(1, 1)])
        assert table.counts == {}
        assert table.total == 0

    def test_mass_and_average(self):
        E = random_kstring_set(2, grid_domain(3), 256, seed=0)
        table = slice_decompose(E, block_bipartition(E.coords, 2).P)
        assert table.total == 256
        assert sum(table.rows.values()) / 2 ** 5 == Fraction(1, 2)

    def test_universe_minus_one_point(self):
        E = KStringSet.universe(2, grid_domain(2)).without((0, 0, 0, 0))
        table = slice_decompose(E, [(1, 1), (1, 2)])
        assert sorted(table.counts.values()) == [3, 4, 4, 4]
        assert len(good_strings(table, 1)) == 4
        assert counting_lemma_holds(E, table, 1)

    def test_eps_range(self):
        table = slice_decompose(KStringSet.universe(2, grid_domain(2)), [(1, 1)])
        with pytest.raises(ArgumentError):
            good_strings(table, 0)
        with pytest.raises(ArgumentError):
            good_strings(table, 1.5)

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("domain", [rect_domain(2, 4), grid_domain(3)])
    @pytest.mark.parametrize("eps", [0.1, 0.3])
    def test_counting_lemma(self, k, domain, eps):
        size = math.ceil(eps * k ** len(domain))
        for seed in range(200):
            E = random_kstring_set(k, domain, size, seed)
            for part in (block_bipartition(domain, 2), random_bipartition(domain, seed)):
                table = slice_decompose(E, part.P)
                assert table.total == len(E)
                assert good_fraction(table, eps) >= Fraction(eps).limit_denominator(10 ** 9) / 2


class TestCountBound:
    @pytest.mark.parametrize("m, k, d, expected", [(1, 2, 1, 2), (2, 2, 1, 16), (1, 3, 2, 4)])
    def test_formula(self, m, k, d, expected):
        assert subspace_count_bound(m, k, d) == expected

    @pytest.mark.parametrize("m, k", [(1, 2), (2, 2), (1, 3), (2, 3)])
    def test_exhaustive_counts_within_bound(self, m, k):
        for d in (1, 2):
            assert count_square_subspaces_exhaustive(m, k, d - 1) <= subspace_count_bound(m, k, d)

    @pytest.mark.parametrize("m, k", [(1, 2), (2, 2), (2, 3), (3, 2)])
    def test_line_count_formula(self, m, k):
        expected = sum(k ** (m * m - bin(mask).count("1") ** 2) for mask in range(1, 1 << m))
        assert count_square_lines_exhaustive(m, k) == expected

    def test_two_by_two_block(self):
        assert count_square_subspaces_exhaustive(2, 2, 0) == 16
        assert count_square_lines_exhaustive(2, 2) == 17

    def test_bad_arguments(self):
        with pytest.raises(ArgumentError):
            subspace_count_bound(0, 2, 1)


class TestSubspaces:
    def test_instantiation_count(self):
        base = kstring(3, grid_domain(3), [0] * 9)
        spec = make_spec(base, [[1], [2, 3]])
        rows = instantiations(spec)
        assert len(rows) == 9
        assert len({r.tobytes() for r in rows}) == 9

    def test_overlapping_wildcards_rejected(self):
        base = kstring(2, grid_domain(3), [0] * 9)
        with pytest.raises(ArgumentError):
            make_spec(base, [[1, 2], [2, 3]])
        with pytest.raises(ArgumentError):
            make_spec(base, [[1], [1]])

    def test_point_times_line_is_translate(self):
        P = ((1, 1),)
        Q = tuple(c for c in grid_domain(2) if c not in P)
        sigma = CombSubspaceSpec(2, kstring(2, P, [1]), ())
        lam = CombSubspaceSpec(2, kstring(2, Q, [0, 1, 0]), ((2,),))
        product = subspace_product(sigma, lam)
        assert product.coords == grid_domain(2)
        assert [tuple(r) for r in instantiations(product)] == [(1, 0, 1, 0), (1, 0, 1, 1)]

    def test_line_times_line(self):
        domain = grid_domain(3)
        part = block_bipartition(domain, 1)
        sigma = make_spec(kstring(2, part.P, [0]), [[1]])
        lam = make_spec(kstring(2, part.Q, [0] * 8), [[2, 3]])
        product = subspace_product(sigma, lam)
        assert product.dimension == 2
        assert len({r.tobytes() for r in instantiations(product)}) == 4

    @given(
        st.integers(2, 4).flatmap(lambda k: st.tuples(
            st.just(k),
            st.lists(st.integers(0, k - 1), min_size=1, max_size=1),
            st.lists(st.integers(0, k - 1), min_size=8, max_size=8),
        )),
        st.sampled_from([[], [[1]]]),
        st.sampled_from([[], [[2, 3]], [[2], [3]]]),
    )
    @settings(max_examples=40, deadline=None)
    def test_product_is_cartesian(self, letters, sigma_alphas, lam_alphas):
        k, p_letters, q_letters = letters
        part = block_bipartition(grid_domain(3), 1)
        sigma = make_spec(kstring(k, part.P, p_letters), sigma_alphas)
        lam = make_spec(kstring(k, part.Q, q_letters), lam_alphas)
        product = subspace_product(sigma, lam)
        assert product.dimension == sigma.dimension + lam.dimension

        def place(x, y):
            letters = dict(zip(sigma.coords, x))
            letters.update(zip(lam.coords, y))
            return tuple(int(letters[c]) for c in product.coords)

        expected = {place(x, y) for x in instantiations(sigma) for y in instantiations(lam)}
        got = [tuple(int(c) for c in row) for row in instantiations(product)]
        assert len(got) == k ** product.dimension
        assert set(got) == expected

    def test_product_rejects_overlap(self):
        sigma = make_spec(kstring(2, grid_domain(1), [0]), [[1]])
        with pytest.raises(ArgumentError):
            subspace_product(sigma, sigma)

    def test_verify(self):
        E = KStringSet.universe(2, grid_domain(2))
        spec = make_spec(kstring(2, grid_domain(2), [0, 1, 0, 0]), [[1]])
        assert verify_subspace_in_set(E, spec)
        assert not verify_subspace_in_set(E.without((1, 1, 0, 0)), spec)

    def test_verify_revalidates_spec(self):
        E = KStringSet.universe(2, grid_domain(3))
        bad = CombSubspaceSpec(2, kstring(2, grid_domain(3), [0] * 9), ((1, 2), (2, 3)))
        assert not verify_subspace_in_set(E, bad)

    def test_json_round_trip(self):
        spec = make_spec(kstring(3, grid_domain(3), [0, 1, 2, 0, 0, 0, 2, 1, 0]), [[1], [3]])
        assert spec_from_json(spec_to_json(spec)) == spec

    @pytest.mark.parametrize("base", [5, None, ["01", "00"]])
    def test_json_non_text_base(self, base):
        with pytest.raises((ArgumentError, GridParseError)):
            spec_from_json(json.dumps({"k": 2, "N": 2, "base": base, "alphas": [[1]]}))


class TestLines:
    def test_universe_has_lines(self):
        E = KStringSet.universe(2, grid_domain(2))
        lines = find_square_lines(E, limit=100)
        assert len(lines) == count_square_lines_exhaustive(2, 2)
        assert all(verify_subspace_in_set(E, spec) for spec in lines)

    def test_empty_set(self):
        E = KStringSet(2, grid_domain(2), np.zeros((0, 4), dtype=np.uint8))
        assert find_square_lines(E) == []

    def test_spiral_line_becomes_subspace(self):
        S = point_set_from_subspace(spiral_basis(4))
        cert = find_line(S, limit=1).certificates[0]
        spec = line_to_spec(cert)
        assert spec.alphas == ((1, 2, 3, 4),)
        assert spec.base.letters == (0,) * 16
        assert verify_subspace_in_set(kstring_set_from_point_set(S), spec)

    def test_only_line_certificates_convert(self):
        S = point_set_from_subspace(spiral_basis(4))
        with pytest.raises(ArgumentError):
            line_to_spec(find_rect_pair(S, IndexSet.of(4, [1])))


class TestInduction:
    @pytest.mark.parametrize("d", [1, 2])
    def test_full_universe(self, d):
        E = KStringSet.universe(2, grid_domain(3))
        report = induction_demo(E, 1, 0.5, d)
        assert report.good_fraction == 1
        assert report.g_density == 1
        assert report.g_density >= report.pigeon_bound
        assert report.spec is not None
        assert report.spec.dimension == d
        assert report.verified

    @given(st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_reported_specs_are_sound(self, seed):
        E = random_kstring_set(2, grid_domain(3), 448, seed)
        report = induction_demo(E, 1, 0.8, 2)
        if report.spec is not None:
            assert report.verified
            assert verify_subspace_in_set(E, report.spec)

    def test_arguments(self):
        E = KStringSet.universe(2, grid_domain(2))
        with pytest.raises(ArgumentError):
            induction_demo(E, 2, 0.5, 2)
        with pytest.raises(ArgumentError):
            induction_demo(E, 1, 0.5, 3)
