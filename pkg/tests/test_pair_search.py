import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from app.grid_core import (
    ArgumentError,
    GridVector,
    GuardError,
    IndexSet,
    Shape,
    ShapeKind,
    classify_shape,
    from_cells,
    full,
    nonempty_index_sets,
    zero,
)
from app.f2_subspace import even_weight_handle, spiral_basis
from app.pair_search import (
    CertificateKind,
    PointSet,
    Representation,
    certificate_from_json,
    certificate_to_json,
    certificates_from_json,
    find_line,
    find_rect_pair,
    find_square_pairs,
    odd_weight_coset,
    pigeonhole_threshold,
    point_set_from_subspace,
    random_point_set,
    rect_pair_census,
    translate,
    verify_certificate,
)


@pytest.fixture(scope="module")
def spiral4():
    return point_set_from_subspace(spiral_basis(4))


class TestPointSet:
    def test_representation_default(self):
        assert PointSet(3, [0, 1]).representation == Representation.TABLE
        assert PointSet(6, [0, 1]).representation == Representation.ASSOCIATIVE

    def test_table_refused_for_large_n(self):
        with pytest.raises(GuardError):
            PointSet(6, [0], Representation.TABLE)

    def test_membership(self):
        S = PointSet(2, [zero(2), full(2)])
        assert full(2) in S
        assert GridVector(2, 1) not in S
        assert GridVector(3, 0) not in S
        assert S.density == 2 / 16

    def test_random_is_seeded(self):
        a = random_point_set(4, 1000, seed=7)
        b = random_point_set(4, 1000, seed=7)
        assert a.keys == b.keys
        assert len(a) == 1000

    def test_random_size_checked(self):
        with pytest.raises(ArgumentError):
            random_point_set(2, 17, seed=0)

    def test_threshold(self, spiral4):
        assert pigeonhole_threshold(spiral4) == 4
        assert pigeonhole_threshold(PointSet(2, [])) is None


class TestRectPair:
    def test_full_set_first_lookup(self):
        S = PointSet(3, range(512))
        cert = find_rect_pair(S, IndexSet.of(3, [2, 3]))
        assert cert.a == zero(3)
        assert cert.shape.gamma1.sorted() == [2, 3]
        assert cert.shape.gamma2.sorted() == [1]

    def test_spiral_row_one(self, spiral4):
        cert = find_rect_pair(spiral4, IndexSet.of(4, [1]))
        assert cert.a == zero(4)
        assert cert.shape.kind == ShapeKind.RECT
        assert cert.shape.gamma1.sorted() == [1]
        assert cert.shape.gamma2.sorted() == [2, 3]
        assert verify_certificate(cert, spiral4)

    def test_spiral_gamma2_parity(self, spiral4):
        for gamma1 in nonempty_index_sets(4):
            cert = find_rect_pair(spiral4, gamma1)
            assert cert is not None
            assert verify_certificate(cert, spiral4)
            assert cert.shape.gamma1 == gamma1

    def test_empty_gamma_rejected(self, spiral4):
        with pytest.raises(ArgumentError):
            find_rect_pair(spiral4, IndexSet.of(4, []))

    def test_sparse_set_may_fail(self):
        assert find_rect_pair(PointSet(3, [0]), IndexSet.of(3, [1])) is None

    @given(st.integers(0, 2 ** 16), st.integers(1, 7), st.integers(2, 200))
    @settings(max_examples=60, deadline=None)
    def test_representations_agree(self, seed, mask, size):
        S = random_point_set(3, size, seed)
        gamma1 = IndexSet.from_mask(3, mask)
        table = find_rect_pair(S, gamma1)
        assoc = find_rect_pair(S.with_representation(Representation.ASSOCIATIVE), gamma1)
        assert table == assoc

    def test_census_marks_lines(self, spiral4):
        census = rect_pair_census(spiral4)
        assert len(census) == 15
        assert all(row["found"] for row in census)

    @pytest.mark.slow
    def test_pigeonhole_at_quarter_density(self):
        """100 个随机集合 × 15 个 γ₁，全部成功"""
        successes = 0
        for seed in range(100):
            S = random_point_set(4, 16384, seed)
            for gamma1 in nonempty_index_sets(4):
                cert = find_rect_pair(S, gamma1)
                assert cert is not None
                assert verify_certificate(cert, S)
                successes += 1
        assert successes == 1500


class TestSquarePairs:
    def test_spiral_only_full_square(self, spiral4):
        report = find_square_pairs(spiral4, limit=10)
        assert report.certificates
        assert not report.complete
        for cert in report.certificates:
            assert cert.shape.gamma1.sorted() == [1, 2, 3, 4]
            assert verify_certificate(cert, spiral4)
        assert report.certificates[0].a == zero(4)
        assert report.certificates[0].b == full(4)

    def test_even_weight_needs_even_gamma(self):
        S = point_set_from_subspace(even_weight_handle(3))
        report = find_square_pairs(S, limit=10 ** 6)
        assert report.complete
        assert {len(c.shape.gamma1) for c in report.certificates} == {2}
        assert all(c.kind == CertificateKind.SQUARE_PAIR for c in report.certificates)

    def test_odd_coset_has_same_differences(self):
        even = point_set_from_subspace(even_weight_handle(3))
        odd = odd_weight_coset(3)
        assert len(odd) == len(even)
        assert not set(odd.keys) & set(even.keys)
        shapes = lambda S: {c.shape for c in find_square_pairs(S, limit=10 ** 6).certificates}
        assert shapes(odd) == shapes(even)

    def test_translate_keeps_differences(self, spiral4):
        t = from_cells(4, [(1, 1), (2, 3)])
        moved = translate(spiral4, t)
        assert len(find_square_pairs(moved, limit=10 ** 5).certificates) == 8192

    def test_single_element(self):
        assert find_square_pairs(PointSet(3, [5]), limit=5).certificates == []

    def test_no_duplicate_pairs(self):
        S = PointSet(2, [zero(2), full(2)])
        report = find_square_pairs(S, limit=10)
        assert len(report.certificates) == 1
        assert report.complete

    def test_exhaustive_refused_above_five(self):
        with pytest.raises(GuardError):
            find_square_pairs(PointSet(6, [0]), limit=1)

    def test_sampled_is_deterministic(self, spiral4):
        a = find_square_pairs(spiral4, limit=5, mode="sampled", seed=3, budget=5000)
        b = find_square_pairs(spiral4, limit=5, mode="sampled", seed=3, budget=5000)
        assert [(c.a, c.b) for c in a.certificates] == [(c.a, c.b) for c in b.certificates]
        assert not a.complete
        assert all(c.search == {"mode": "sampled", "seed": 3} for c in a.certificates)

    def test_sampled_without_seed_uses_default(self, spiral4):
        a = find_square_pairs(spiral4, limit=5, mode="sampled", budget=5000)
        b = find_square_pairs(spiral4, limit=5, mode="sampled", budget=5000)
        pinned = find_square_pairs(spiral4, limit=5, mode="sampled", seed=0, budget=5000)
        assert a.certificates
        assert [(c.a, c.b) for c in a.certificates] == [(c.a, c.b) for c in b.certificates]
        assert [(c.a, c.b) for c in a.certificates] == [(c.a, c.b) for c in pinned.certificates]
        assert a.seed == 0
        assert all(c.search == {"mode": "sampled", "seed": 0} for c in a.certificates)

    @given(st.integers(1, 3).flatmap(
        lambda n: st.tuples(st.just(n), st.sets(st.integers(0, (1 << (n * n)) - 1), max_size=40))
    ))
    @settings(max_examples=50, deadline=None)
    def test_matches_double_loop(self, case):
        n, keys = case
        S = PointSet(n, sorted(keys))
        expected = set()
        for i, a in enumerate(S.keys):
            for b in S.keys[i + 1:]:
                if classify_shape(GridVector(n, a ^ b)).kind == ShapeKind.SQUARE:
                    expected.add(frozenset((a, b)))
        report = find_square_pairs(S, limit=10 ** 6)
        found = [frozenset((c.a.bits, c.b.bits)) for c in report.certificates]
        assert report.complete
        assert len(found) == len(set(found))
        assert set(found) == expected

    def test_threads_do_not_change_order(self, spiral4):
        one = find_square_pairs(spiral4, limit=50, threads=1)
        four = find_square_pairs(spiral4, limit=50, threads=4)
        assert one.certificates == four.certificates


class TestLine:
    def test_spiral_contains_zero_to_full_line(self, spiral4):
        report = find_line(spiral4, limit=10)
        assert report.complete
        assert len(report.certificates) == 1
        cert = report.certificates[0]
        assert (cert.a, cert.b) == (zero(4), full(4))
        assert cert.oriented
        assert cert.kind == CertificateKind.LINE
        assert verify_certificate(cert, spiral4)

    def test_unoriented_square_pair_is_not_a_line(self):
        v = from_cells(2, [(1, 1), (1, 2)])
        w = from_cells(2, [(2, 1), (2, 2)])
        S = PointSet(2, [v, w])
        assert len(find_square_pairs(S, limit=5).certificates) == 1
        assert find_line(S, limit=5).certificates == []

    def test_empty_set(self):
        assert find_line(PointSet(3, []), limit=5).certificates == []


class TestCertificate:
    def test_tampered_b_fails(self, spiral4):
        cert = find_line(spiral4, limit=1).certificates[0]
        tampered = replace(cert, b=GridVector(4, cert.b.bits ^ 1))
        assert not verify_certificate(tampered, spiral4)

    def test_mislabeled_shape_fails(self, spiral4):
        cert = find_rect_pair(spiral4, IndexSet.of(4, [1]))
        gamma = cert.shape.gamma1
        tampered = replace(cert, shape=Shape(ShapeKind.SQUARE, gamma, gamma))
        assert not verify_certificate(tampered, spiral4)

    def test_wrong_set_fails(self, spiral4):
        cert = find_line(spiral4, limit=1).certificates[0]
        assert not verify_certificate(cert, PointSet(4, [0]))

    def test_json_round_trip(self, spiral4):
        for cert in (find_rect_pair(spiral4, IndexSet.of(4, [2, 4])), find_line(spiral4, limit=1).certificates[0]):
            text = certificate_to_json(cert)
            again = certificate_from_json(text)
            assert again == cert
            assert verify_certificate(again, spiral4)
            assert set(json.loads(text)) == {"kind", "n", "a", "b", "gamma1", "gamma2", "oriented", "search"}

    def test_malformed_json(self):
        with pytest.raises(ArgumentError):
            certificate_from_json(json.dumps({"kind": "Line"}))

    def test_non_text_grid_field(self, spiral4):
        data = json.loads(certificate_to_json(find_line(spiral4, limit=1).certificates[0]))
        data["a"] = 5
        with pytest.raises(ArgumentError):
            certificate_from_json(json.dumps(data))

    def test_reads_bare_and_enveloped(self, spiral4):
        certs = find_square_pairs(spiral4, limit=3).certificates
        bare = json.loads(certificate_to_json(certs[0]))
        assert certificates_from_json(json.dumps(bare)) == [certs[0]]
        single = {"command": "rect-pair", "ok": True, "result": {"certificate": bare}}
        assert certificates_from_json(json.dumps(single)) == [certs[0]]
        many = {"command": "square-pairs", "ok": True,
                "result": {"certificates": [json.loads(certificate_to_json(c)) for c in certs]}}
        assert certificates_from_json(json.dumps(many)) == certs

    @pytest.mark.parametrize("result", [{"certificate": None}, {"certificates": []}, [], "x"])
    def test_envelope_without_certificate(self, result):
        with pytest.raises(ArgumentError):
            certificates_from_json(json.dumps({"command": "lines", "ok": False, "result": result}))

    def test_deterministic_output(self):
        S = random_point_set(4, 16384, seed=11)
        first = [certificate_to_json(find_rect_pair(S, g)) for g in nonempty_index_sets(4)]
        again = [certificate_to_json(find_rect_pair(random_point_set(4, 16384, seed=11), g))
                 for g in nonempty_index_sets(4)]
        assert first == again
