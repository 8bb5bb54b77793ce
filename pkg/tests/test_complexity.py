import pytest

from qsurrogate.complexity import ComplexityDims, complexity, model_counts
from qsurrogate.nn import EmbedConfig, QuantumConfig, build_variant


def test_default_counts():
    rep = complexity()
    assert rep.classical_terms == (448, 2048, 32544)
    assert rep.c_classical == 35040
    assert rep.qmlp_terms == (21952, 100, 640, 65088)
    assert rep.c_qmlp == 87780
    assert rep.ratio == pytest.approx(87780 / 35040, rel=1e-15)


def test_rounded_to_two_significant_figures():
    rep = complexity()
    assert float(f"{rep.c_classical:.1e}") == 3.5e4
    assert float(f"{rep.c_qmlp:.1e}") == 8.8e4
    assert round(rep.ratio, 1) == 2.5


def test_text_mentions_every_total():
    text = complexity().text()
    for token in ("35040", "87780", "2.505", "32544"):
        assert token in text


def test_counts_scale_with_dims():
    rep = complexity(ComplexityDims(d_out=1))
    assert rep.c_classical == 448 + 2048 + 32


def test_non_positive_dims_rejected():
    with pytest.raises(ValueError):
        ComplexityDims(h1=0)
    with pytest.raises(ValueError):
        ComplexityDims(n_qubits=-1)


def test_built_model_counts():
    base = model_counts(build_variant("BaselineMLP"))
    assert base["dense_macs"] == complexity().c_classical
    assert base["rotation_gates"] == base["two_qubit_gates"] == 0
    hc = build_variant("PolySPD_HC_Clustered", quantum=QuantumConfig(n_layers=10),
                       embed=EmbedConfig(terms="exact_degree_only"))
    counts = model_counts(hc)
    assert counts["rotation_gates"] == 10 * 10
    assert counts["two_qubit_gates"] == 10 * 10  # ring on 10 qubits
    assert counts["dense_macs"] == 10 * 64 + 64 * 7 + 7 * 1017
