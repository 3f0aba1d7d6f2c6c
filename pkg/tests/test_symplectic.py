import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ocfactor.errors import NonIntegrableTerm, NotClosed
from ocfactor.expr import OneForm, is_zero
from ocfactor.factorization import identity_candidate, reconstruct_Qtilde
from ocfactor.frame import CoordinateFrame
from ocfactor.symplectic import (
    PulledBackTwoForm,
    antiderivative,
    drop_constant,
    equal_modulo_constant,
    interior_product,
    is_closed,
    lie_derivative_fn,
    lie_derivative_oneform,
    poisson_bracket,
    reconstruct_potential,
    tautological_form,
)

CAN = CoordinateFrame.canonical(2)
p1, p2, q1, q2 = CAN.symbols
FAC = CoordinateFrame.factor(1)
x1, y1 = FAC.symbols
half = sp.Rational(1, 2)


def form(hs, **coeffs):
    coords = hs.frame.symbols
    return OneForm(coords, tuple(sp.sympify(coeffs.get(str(c), 0)) for c in coords))


# -- brackets -----------------------------------------------------------------


def test_bracket_of_state_with_hamiltonian_is_velocity(e1):
    assert poisson_bracket(q1, e1.hamiltonian, e1.frame) == p2 / q1


def test_canonical_pair_orientation():
    assert poisson_bracket(q1, p1, CAN) == 1
    assert poisson_bracket(p1, q1, CAN) == -1


def test_lie_derivative_examples(e1, e4):
    assert lie_derivative_fn(e1, q1**2) == 2 * p2
    assert lie_derivative_fn(e1, e1.hamiltonian) == 0
    assert lie_derivative_fn(e4, p1 * p2) == p1


def test_lie_derivative_of_exact_hamiltonian_form(hams):
    for hs in hams.values():
        dH = OneForm.differential(hs.hamiltonian, hs.frame.symbols)
        assert lie_derivative_oneform(hs, dH).is_zero(hs.charts).is_yes


def test_lie_derivative_of_first_example_form(e1):
    rho = lie_derivative_oneform(e1, tautological_form([2 * p2], [q1**2], e1.frame.symbols))
    expected = form(e1, q1=4 * q1**2, p2=4 * p2)
    assert (rho - expected).is_zero(e1.charts).is_yes
    assert (rho - OneForm.differential(2 * p2**2 + sp.Rational(4, 3) * q1**3, e1.frame.symbols)).is_zero().is_yes


def test_lie_derivative_second_example_form(e2):
    x, y = q1 - q2 + p2 - p1, p2 - p1
    rho = lie_derivative_oneform(e2, tautological_form([x], [y], e2.frame.symbols))
    target = OneForm.differential(half * x**2 - half * y**2, e2.frame.symbols)
    assert (rho - target).is_zero().is_yes


def test_interior_product_identity_is_dH(hams):
    for hs in hams.values():
        ih = interior_product(hs, PulledBackTwoForm(hs.costates, hs.states))
        assert (ih - OneForm.differential(hs.hamiltonian, hs.frame.symbols)).is_zero(hs.charts).is_yes


def test_interior_product_first_example(e1):
    ih = interior_product(e1, PulledBackTwoForm([2 * p2], [q1**2]))
    assert (ih - form(e1, p2=4 * p2, q1=-4 * q1**2)).is_zero(e1.charts).is_yes


def test_interior_product_constant_x_map(e1):
    ih = interior_product(e1, PulledBackTwoForm([sp.Integer(3)], [q1]))
    assert ih.is_zero().is_yes


# -- closedness and potentials ------------------------------------------------


def test_closedness_examples(e1, hams):
    assert is_closed(form(e1, p2=4 * p2, q1=-4 * q1**2)).test.is_yes
    rho = lie_derivative_oneform(e1, tautological_form([p2], [q2], e1.frame.symbols))
    bad = is_closed(rho, e1.charts)
    assert bad.test.is_no and bad.pair is not None
    for hs in hams.values():
        assert is_closed(OneForm.differential(hs.hamiltonian, hs.frame.symbols), hs.charts).test.is_yes


def test_potential_of_interior_product(e1):
    rho = form(e1, p2=4 * p2, q1=-4 * q1**2)
    Q = reconstruct_potential(rho, {p1: 0, p2: 0, q1: 1, q2: 0}, e1.charts)
    assert equal_modulo_constant(Q, 2 * p2**2 - sp.Rational(4, 3) * q1**3, e1.frame.symbols).is_yes
    assert Q.xreplace({p2: 0, q1: 1}) == 0


def test_potential_of_exact_form_roundtrip(e1):
    base = {p1: 1, p2: 1, q1: 1, q2: 1}
    Q = reconstruct_potential(OneForm.differential(e1.hamiltonian, e1.frame.symbols), base, e1.charts)
    assert is_zero(Q - (e1.hamiltonian - e1.hamiltonian.xreplace(base)), e1.charts).is_yes


def test_radial_potential_on_factor_frame():
    Q = reconstruct_potential(OneForm((x1, y1), (x1, y1)), {x1: 0, y1: 0})
    assert Q == half * x1**2 + half * y1**2


def test_potential_requires_closedness(e1):
    with pytest.raises(NotClosed):
        reconstruct_potential(form(e1, p1=q1), {p1: 0, p2: 0, q1: 1, q2: 0})


def test_logarithmic_antiderivative_rejected():
    with pytest.raises(NonIntegrableTerm):
        antiderivative(1 / q1, q1)


def test_drop_constant():
    assert drop_constant(2 * p2**2 + 3) == 2 * p2**2
    assert drop_constant(sp.Integer(5)) == 0


# -- Cartan formula -----------------------------------------------------------


def cartan_residual(hs, xs, ys):
    """L_h(x dy) - [d(x (y, H)) - i_h Omega] componentwise."""
    coords = hs.frame.symbols
    lhs = lie_derivative_oneform(hs, tautological_form(xs, ys, coords))
    exact = OneForm.differential(sum(x * lie_derivative_fn(hs, y) for x, y in zip(xs, ys)), coords)
    return lhs - (exact - interior_product(hs, PulledBackTwoForm(xs, ys)))


def test_cartan_formula_on_every_corpus_candidate(corpus, hams):
    for name, hs in hams.items():
        for c in corpus[name].candidates + corpus[f"{name}_identity"].candidates:
            assert cartan_residual(hs, c.xs, c.ys).is_zero(hs.charts).holds, (name, c.name)


def test_cartan_formula_sign_with_plus_fails(e1):
    # With "+ i_h Omega" the identity is off by 2 i_h Omega, which is nonzero here.
    coords = e1.frame.symbols
    xs, ys = [2 * p2], [q1**2]
    lhs = lie_derivative_oneform(e1, tautological_form(xs, ys, coords))
    plus = OneForm.differential(2 * p2 * lie_derivative_fn(e1, q1**2), coords) + interior_product(
        e1, PulledBackTwoForm(xs, ys))
    assert (lhs - plus).is_zero(e1.charts).is_no


def test_first_integral_of_interior_product_potential(corpus, hams):
    checked = 0
    for name, hs in hams.items():
        for c in corpus[name].candidates + corpus[f"{name}_identity"].candidates:
            ih = interior_product(hs, c.two_form)
            if not is_closed(ih, hs.charts).test.holds:
                continue
            G = reconstruct_potential(ih, {s: 1 for s in hs.frame.symbols}, hs.charts)
            assert is_zero(lie_derivative_fn(hs, G), hs.charts).is_yes, (name, c.name)
            checked += 1
    assert checked >= 7


def test_identity_potential_is_running_cost(hams):
    for hs in hams.values():
        c = identity_candidate(hs)
        Q = reconstruct_Qtilde(hs, c)
        assert equal_modulo_constant(Q, c.qtilde, hs.frame.symbols, hs.charts).is_yes


# -- bracket properties -------------------------------------------------------

VARS = (p1, p2, q1, q2)


@st.composite
def polynomials(draw, depth=2):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return sp.Integer(draw(st.integers(-3, 3)))
        return draw(st.sampled_from(VARS)) ** draw(st.integers(1, 3))
    a, b = draw(polynomials(depth - 1)), draw(polynomials(depth - 1))
    return draw(st.sampled_from([a + b, a - b, a * b]))


PROP = settings(max_examples=100, deadline=None)


@PROP
@given(polynomials(), polynomials())
def test_bracket_antisymmetry(f, g):
    assert is_zero(poisson_bracket(f, g, CAN) + poisson_bracket(g, f, CAN)).is_yes
    assert poisson_bracket(f, f, CAN) == 0


@PROP
@given(polynomials(), polynomials(), polynomials())
def test_bracket_leibniz(f, g, h):
    B = lambda a, b: poisson_bracket(a, b, CAN)  # noqa: E731
    assert is_zero(B(f * g, h) - f * B(g, h) - g * B(f, h)).is_yes


@PROP
@given(polynomials(), polynomials(), polynomials())
def test_bracket_jacobi(f, g, h):
    B = lambda a, b: poisson_bracket(a, b, CAN)  # noqa: E731
    assert is_zero(B(B(f, g), h) + B(B(g, h), f) + B(B(h, f), g)).is_yes


@PROP
@given(polynomials(), polynomials(), polynomials(), polynomials())
def test_potential_roundtrip_on_exact_forms(a, b, c, d):
    f = a * b + c * d
    rho = OneForm.differential(f, VARS)
    Q = reconstruct_potential(rho, {s: 0 for s in VARS})
    assert (OneForm.differential(Q, VARS) - rho).is_zero().is_yes
