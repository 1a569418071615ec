import json

import pytest
from hypothesis import given, settings, strategies as st

from app.grid_core import (
    ArgumentError,
    ConstructionError,
    GridVector,
    GuardError,
    IndexSet,
    cell,
    from_cells,
    full,
    nonempty_index_sets,
    square_vector,
    unit_vectors,
    xor_add,
    zero,
)
from app.f2_subspace import (
    MembershipMode,
    ParityKernelMembership,
    RowReduceMembership,
    SubspaceHandle,
    create_instance,
    diagonal_functional,
    even_weight_handle,
    even_weight_membership,
    format_basis,
    from_elements,
    handle_from_json,
    handle_to_json,
    parity_membership,
    parse_basis,
    row_reduce,
    span_enumerate,
    spiral_basis,
    spiral_elements,
    square_membership_report,
    square_residue_ok,
    upper_functional,
)
from strategies import grids_of


class TestRowReduce:
    def test_duplicate_collapses(self):
        v = from_cells(3, [(1, 2), (3, 3)])
        assert row_reduce([v, v]).rank == 1

    def test_unit_cells_span_everything(self):
        handle = from_elements(unit_vectors(2))
        assert handle.rank == 4
        assert len(list(span_enumerate(handle))) == 16

    def test_forced_dependency(self):
        a, b = cell(3, 1, 1), from_cells(3, [(2, 1), (3, 2)])
        basis = row_reduce([a, b, xor_add(a, b)])
        assert basis.rank == 2
        assert not basis.is_independent

    def test_empty_needs_explicit_n(self):
        with pytest.raises(ArgumentError):
            row_reduce([])
        assert row_reduce([], n=3).rank == 0

    @given(st.lists(grids_of(3), min_size=1, max_size=8))
    def test_members_of_span_reduce_to_zero(self, vectors):
        basis = row_reduce(vectors)
        for v in vectors:
            assert basis.contains(v)
        total = zero(3)
        for v in vectors:
            total = xor_add(total, v)
        assert basis.contains(total)

    @given(st.lists(grids_of(3), min_size=1, max_size=6))
    def test_rank_matches_span_size(self, vectors):
        handle = from_elements(vectors)
        span = {v.bits for v in span_enumerate(handle)}
        assert len(span) == 1 << handle.rank


class TestSpiral:
    @pytest.mark.parametrize("n", range(2, 13))
    def test_rank(self, n):
        elements = spiral_elements(n)
        handle = spiral_basis(n)
        assert len(elements) == n * n - 2
        assert handle.rank == n * n - 2
        assert handle.membership_mode == MembershipMode.PARITY_KERNEL

    @pytest.mark.parametrize("n", range(2, 13))
    def test_square_members_iff_size_divisible_by_four(self, n):
        handle = spiral_basis(n)
        for gamma in nonempty_index_sets(n):
            v = square_vector(gamma, n)
            assert parity_membership(handle, v) == (len(gamma) % 4 == 0)

    def test_parity_agrees_with_row_reduce(self):
        handle = spiral_basis(5)
        report = square_membership_report(handle)
        assert all(row["member"] == row["row_reduce_member"] for row in report)
        assert square_residue_ok(handle)

    def test_n4_examples(self):
        handle = spiral_basis(4)
        assert handle.contains(full(4))
        assert not handle.contains(square_vector(IndexSet.of(4, [1, 2]), 4))
        assert parity_membership(handle, zero(4))
        assert not parity_membership(handle, cell(4, 1, 1))

    def test_n4_span(self):
        handle = spiral_basis(4)
        span = list(span_enumerate(handle))
        assert len(span) == 16384
        assert len({v.bits for v in span}) == 16384
        assert all(parity_membership(handle, v) for v in span)
        squares = {square_vector(g, 4).bits: g for g in nonempty_index_sets(4)}
        found = [squares[v.bits] for v in span if v.bits in squares]
        assert [g.sorted() for g in found] == [[1, 2, 3, 4]]

    def test_n_below_two(self):
        with pytest.raises(ArgumentError):
            spiral_basis(1)

    @given(grids_of(4))
    @settings(max_examples=200)
    def test_membership_modes_agree(self, v):
        handle = spiral_basis(4)
        assert handle.contains(v) == handle.basis.contains(v)


class TestHandle:
    def test_factory(self):
        basis = row_reduce([cell(2, 1, 1)])
        assert isinstance(create_instance(MembershipMode.ROW_REDUCE, basis), RowReduceMembership)
        parity = create_instance(MembershipMode.PARITY_KERNEL, basis, [cell(2, 2, 2)])
        assert isinstance(parity, ParityKernelMembership)

    def test_mismatched_kernel_rejected(self):
        basis = row_reduce([cell(2, 1, 1)])
        with pytest.raises(ConstructionError):
            SubspaceHandle(basis, MembershipMode.PARITY_KERNEL, (cell(2, 1, 1),))
        with pytest.raises(ConstructionError):
            SubspaceHandle(basis, MembershipMode.PARITY_KERNEL, (cell(2, 2, 2),))

    def test_json_round_trip(self):
        handle = spiral_basis(3)
        again = handle_from_json(handle_to_json(handle))
        assert again.membership_mode == MembershipMode.PARITY_KERNEL
        assert again.rank == 7
        assert json.loads(handle_to_json(handle))["membership_mode"] == "ParityKernel"

    def test_basis_text_round_trip(self):
        basis = spiral_basis(3).basis
        assert parse_basis(format_basis(basis)).reduced == basis.reduced

    def test_functionals(self):
        assert diagonal_functional(3).popcount == 3
        assert upper_functional(3).popcount == 3


class TestSpan:
    def test_rank_zero(self):
        assert list(span_enumerate(from_elements([], n=2))) == [GridVector(2, 0)]

    def test_gray_order_flips_one_basis_row(self):
        handle = from_elements(unit_vectors(2)[:3])
        span = list(span_enumerate(handle))
        rows = {v.bits for v in handle.basis.reduced}
        for a, b in zip(span, span[1:]):
            assert (a.bits ^ b.bits) in rows

    def test_guard(self):
        with pytest.raises(GuardError):
            list(span_enumerate(spiral_basis(4), rank_limit=10))


class TestEvenWeight:
    def test_examples(self):
        assert even_weight_membership(zero(3))
        assert not even_weight_membership(cell(3, 2, 2))

    @given(grids_of(3), grids_of(3))
    def test_closed_under_addition(self, a, b):
        if even_weight_membership(a) and even_weight_membership(b):
            assert even_weight_membership(xor_add(a, b))

    def test_handle_is_half(self):
        handle = even_weight_handle(3)
        assert handle.rank == 8
        assert all(even_weight_membership(v) for v in span_enumerate(handle))


def _combine(handle, mask):
    bits = 0
    for i, row in enumerate(handle.basis.reduced):
        if mask >> i & 1:
            bits ^= row.bits
    return GridVector(handle.n, bits)


class TestMembershipAgreement:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_parity_matches_row_reduce_everywhere(self, n):
        handle = spiral_basis(n)
        members = 0
        for bits in range(1 << (n * n)):
            v = GridVector(n, bits)
            in_span = handle.basis.contains(v)
            assert parity_membership(handle, v) == in_span
            members += in_span
        assert members == 1 << (n * n - 2)

    @given(st.integers(2, 5).flatmap(
        lambda n: st.tuples(st.just(n), st.integers(0, (1 << (n * n - 2)) - 1), st.integers(0, (1 << (n * n - 2)) - 1))
    ))
    @settings(max_examples=60)
    def test_span_closed_under_addition(self, case):
        n, left, right = case
        handle = spiral_basis(n)
        u, w = _combine(handle, left), _combine(handle, right)
        assert handle.contains(u) and handle.contains(w)
        assert handle.contains(xor_add(u, w))
        assert parity_membership(handle, xor_add(u, w))

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_even_weight_is_exactly_half(self, n):
        total = 1 << (n * n)
        even = sum(even_weight_membership(GridVector(n, bits)) for bits in range(total))
        assert even == total // 2

    @pytest.mark.parametrize("n", [2, 3])
    def test_even_weight_handle_agrees_everywhere(self, n):
        handle = even_weight_handle(n)
        assert handle.rank == n * n - 1
        for bits in range(1 << (n * n)):
            v = GridVector(n, bits)
            assert handle.contains(v) == handle.basis.contains(v) == even_weight_membership(v)
