import csv
import io
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spectra.diffraction import (
    AmplitudeEngine,
    SpectrumTable,
    amplitudes_at,
    density,
    enumerate_peaks,
    export_spectrum,
    intensity,
    miller_box,
    pisa_density,
)
from spectra.numberfield import internal_frequency, miller_to_k
from spectra.oracle import fibonacci_closed_forms

TAU = (1 + 5**0.5) / 2


def test_density_tribonacci(sys_of):
    s = sys_of("tribonacci")
    lam = s.pf.lam
    total, per = density(s)
    assert total == pytest.approx((5 + lam + 2 * lam**2) / 22, abs=1e-13)
    assert total == pytest.approx(0.618420, abs=1e-6)
    assert per.sum() == pytest.approx(total, abs=1e-14)
    assert per == pytest.approx(total * s.pf.v)


def test_density_pisa4(sys_of):
    assert density(sys_of("pisa4"))[0] == pytest.approx(0.566343, abs=1e-6)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_pisa_density_formula(sys_of, d):
    s = sys_of(f"pisa_{d}")
    # independent direct computation: 1 / (v . lengths) from the matrix alone
    w, V = np.linalg.eig(s.M.astype(float))
    v = np.abs(V[:, np.argmax(w.real)].real)
    v /= v.sum()
    assert 1 / (v @ s.length_values) == pytest.approx(pisa_density(d, s.pf.lam), abs=1e-10)
    assert density(s)[0] == pytest.approx(pisa_density(d, s.pf.lam), abs=1e-10)


def test_fibonacci_density(sys_of):
    total, _ = density(sys_of("fibonacci"))
    # lengths (tau, 1) with frequencies (1/tau, 1/tau^2)
    assert total == pytest.approx(1 / (1 + 1 / TAU**2), abs=1e-14)


def test_amplitudes_at_zero(sys_of):
    for name in ("fibonacci", "tribonacci", "rho_prime"):
        s = sys_of(name)
        A, _ = AmplitudeEngine(s).at_miller([0] * s.emb.degree)
        _, per = density(s)
        assert np.allclose(A.values, per, atol=1e-12)
        assert A.values.sum() == pytest.approx(s.density, abs=1e-10)


def test_fibonacci_amplitude_closed_form(sys_of, win_of):
    s, sol = sys_of("fibonacci"), win_of("fibonacci")
    total, per = density(s)
    for m in [(1, 0), (0, 1), (2, -1), (3, 5)]:
        A, _ = AmplitudeEngine(s, sol).at_miller(m)
        _, _, kf = miller_to_k(m, s.emb)
        y = internal_frequency(kf, s.emb)[0]
        fa, fb = fibonacci_closed_forms(np.array(y))
        assert A.values[0] == pytest.approx(per[0] / 1.0 * fa, abs=1e-10)
        assert A.values[1] == pytest.approx(per[1] / (TAU - 1) * fb, abs=1e-10)


@pytest.mark.parametrize("name", ["fibonacci", "rho_tilde", "twisted_fib_ext"])
def test_amplitude_formulas_agree(sys_of, win_of, name):
    # dens * c_i and dens_i / vol_i * f_i coincide whenever vol_i = eta v_i
    s, sol = sys_of(name), win_of(name)
    eng = AmplitudeEngine(s)
    res = eng.riesz(np.random.default_rng(0).uniform(-3, 3, (30, 1)))
    a = amplitudes_at(res, s.density)
    class NonConstant:
        constant = False
    b = amplitudes_at(res, s.density, NonConstant(), sol.v, sol.volumes, sol.eta)
    assert a.formula == "constant-covering" and b.formula == "per-letter"
    # agreement is limited by how well vol_i = eta v_i holds for the solved windows
    assert np.max(np.abs(a.values - b.values)) < 1e-9


def test_per_letter_formula_needs_volumes(sys_of):
    s = sys_of("fibonacci")
    res = AmplitudeEngine(s).riesz(np.zeros(1))
    class NonConstant:
        constant = False
    with pytest.raises(ValueError):
        amplitudes_at(res, s.density, NonConstant())


def test_rho_prime_uses_per_letter_formula(sys_of, win_of):
    A, _ = AmplitudeEngine(sys_of("rho_prime"), win_of("rho_prime")).at_miller((1, 0))
    assert A.formula == "per-letter"


def test_twisted_fib_ext_covering_two(sys_of, win_of):
    # A_i = dens(L)/m_c * FT(1_{W_i}) at the internal partner, with m_c = 2
    s, sol = sys_of("twisted_fib_ext"), win_of("twisted_fib_ext")
    assert sol.covering.degree == 2
    dens_lattice = 1 / abs(np.linalg.det(s.emb.B))
    eng = AmplitudeEngine(s, sol)
    for m in [(1, 0), (0, 1), (1, 1), (2, -1)]:
        A, _ = eng.at_miller(m)
        y = internal_frequency(miller_to_k(m, s.emb)[2], s.emb)[0]
        expected = np.array([dens_lattice / 2 * W.ft(y) for W in sol.windows])
        assert np.max(np.abs(A.values - expected)) < 1e-10


def test_outside_module_is_zero(sys_of):
    s = sys_of("tribonacci")
    eng = AmplitudeEngine(s)
    half = s.emb.theta * s.emb.field([1, 0, 0]) / 2
    A = eng.at_field(half)
    assert A.formula == "outside-module" and np.all(A.values == 0)
    A1 = eng.at_field(s.emb.theta * s.emb.field([1, 0, 0]))
    assert A1.formula == "constant-covering" and np.any(A1.values != 0)


def test_intensity_and_symmetry(sys_of):
    s = sys_of("tribonacci")
    eng = AmplitudeEngine(s)
    rng = np.random.default_rng(2)
    M = rng.integers(-6, 7, (40, 3))
    A, _, _ = eng.batch(M)
    Aneg, _, _ = eng.batch(-M)
    h = np.array([1.0, 0.5, 2.0])
    assert np.allclose(intensity(A, h), intensity(Aneg, h), atol=1e-14)
    assert np.allclose(A, np.conj(Aneg), atol=1e-12)
    assert intensity(np.array([1 + 1j, 2]), np.array([1, 1])) == pytest.approx(10)


def test_tribonacci_intensity_formula(sys_of):
    s = sys_of("tribonacci")
    lam = s.pf.lam
    eng = AmplitudeEngine(s)
    for m in [(1, 0, 0), (0, 1, 0), (2, -1, 3)]:
        A, res = eng.at_miller(m)
        direct = ((5 + lam + 2 * lam**2) / 22) ** 2 * abs(np.ones(3) @ res.C @ s.pf.v) ** 2
        assert intensity(A.values, np.ones(3)) == pytest.approx(direct, rel=1e-12)


def test_miller_box():
    box = miller_box(2, 1)
    assert len(box) == 9
    assert miller_box(3, (1, 0, 2)).shape == (15, 3)
    with pytest.raises(ValueError):
        miller_box(2, (1,))


@pytest.fixture(scope="module")
def fib_table(sys_of, win_of):
    return enumerate_peaks(sys_of("fibonacci"), box=10, kmax=5, windows=win_of("fibonacci"))


def test_enumerate_fibonacci(fib_table, sys_of):
    t = fib_table
    s = sys_of("fibonacci")
    assert np.all(np.diff(t.k) >= 0)
    assert np.all((t.k >= -1e-12) & (t.k <= 5 + 1e-12))
    assert np.all(t.intensity >= 1e-6 * s.density**2)
    zero = [r for r in t.rows if not any(r.miller)]
    assert len(zero) == 1 and zero[0].intensity == pytest.approx(s.density**2, abs=1e-10)
    assert t.meta["coincident_k"] == 0
    assert t.meta["covering_degree"] == 1
    assert t.formula == "constant-covering"


def test_enumerate_threads_deterministic(sys_of):
    s = sys_of("tribonacci")
    a = enumerate_peaks(s, box=4, kmax=4, threads=1)
    eng = AmplitudeEngine(s)
    b = enumerate_peaks(s, box=4, kmax=4, threads=4, engine=eng)
    eng_small = AmplitudeEngine(s)
    A1, _, _ = eng_small.batch(miller_box(3, 4), threads=1, chunk=50)
    A4, _, _ = eng_small.batch(miller_box(3, 4), threads=4, chunk=50)
    assert np.array_equal(A1, A4)
    assert export_spectrum(a, "csv") == export_spectrum(b, "csv")


def test_enumerate_weights_checked(sys_of):
    with pytest.raises(ValueError):
        enumerate_peaks(sys_of("fibonacci"), box=2, weights=[1, 1, 1])


def test_enumerate_empty_warns(sys_of):
    t = enumerate_peaks(sys_of("fibonacci"), box=2, kmin=100, kmax=101)
    assert len(t) == 0
    assert "warning" in t.meta
    text = export_spectrum(t, "csv", d=2)
    assert text.splitlines() == ["m0,m1,k,kstar1,re_A_a,im_A_a,re_A_b,im_A_b,intensity"]


def test_export_csv(fib_table):
    text = export_spectrum(fib_table, "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == len(fib_table)
    r0 = fib_table.rows[0]
    assert float(rows[0]["k"]) == pytest.approx(r0.k, abs=1e-14)
    assert float(rows[0]["intensity"]) == pytest.approx(r0.intensity, rel=1e-14)
    assert export_spectrum(fib_table, "csv") == text


def test_export_json(fib_table):
    doc = json.loads(export_spectrum(fib_table, "json"))
    assert len(doc["peaks"]) == len(fib_table)
    assert doc["formula"] == "constant-covering"
    assert doc["peaks"][0]["miller"] == list(fib_table.rows[0].miller)


def test_export_svg(fib_table):
    svg = export_spectrum(fib_table, "svg")
    root = ET.fromstring(svg)
    texts = [e.text for e in root.iter() if e.tag.split("}")[-1] == "text"]
    top = fib_table.top(1)[0]
    assert "(" + ",".join(map(str, top.miller)) + ")" in texts
    assert export_spectrum(fib_table, "svg") == svg


def test_export_unknown_format(fib_table):
    with pytest.raises(ValueError):
        export_spectrum(fib_table, "pdf")


def test_top_excludes_zero(fib_table):
    assert all(any(r.miller) for r in fib_table.top(5))
    assert not any(fib_table.top(1, include_zero=True)[0].miller)
    assert isinstance(fib_table, SpectrumTable)
