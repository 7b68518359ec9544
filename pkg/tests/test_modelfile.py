import pytest

from acausal.hydraulics import build_fig2_network
from acausal.model import alias_eliminate, dump, flatten
from acausal.modelfile import (
    CATALOG, ModelFileError, fixture_dir, load_model, parse_model, resolve_path,
)
from acausal.thermo import IdealGasBackend, ToyWaterBackend, build_rankine

PUMP_PIPE = """\
version: 1
components:
  - {type: Sink_P, name: A, params: {p: 101325.0}}
  - {type: CentrifugalPump, name: Pump}
  - {type: SimplePipe, name: Pipe}
  - {type: Sink_P, name: B, params: {p: 101325.0}}
connections:
  - [A.port, Pump.in]
  - [Pump.out, Pipe.in]
  - [Pipe.out, B.port]
"""


def reduced_dump(comps_sets):
    return dump(alias_eliminate(flatten(*comps_sets)))


def test_fig2_fixture_shape():
    doc = load_model("fig2_network")
    assert len(doc.components) == 28
    assert len(doc.connections) == 19
    assert reduced_dump(doc.build()) == reduced_dump(build_fig2_network())


def test_rankine_fixture_shape():
    doc = load_model("fig3_rankine")
    types = [c.type for c in doc.components]
    assert sum(t.endswith("Process") for t in types) == 6
    assert types.count("ThermalStates") == 4 and types.count("DThermalStates") == 1
    assert isinstance(doc.backend(), ToyWaterBackend)
    assert reduced_dump(doc.build()) == reduced_dump(build_rankine())
    sched = doc.sweep.schedule()
    assert len(sched.times) == 11 and sched.times[-1] == 100.0


def test_string_numbers_are_accepted():
    doc = parse_model(PUMP_PIPE.replace("{type: CentrifugalPump, name: Pump}",
                                        "{type: CentrifugalPump, name: Pump, params: {c0: '4.4e-4'}}"))
    assert doc.components[1].params["c0"] == 4.4e-4


@pytest.mark.parametrize("edit, fragment", [
    (("[Pipe.out, B.port]", "[Pipe99.out, B.port]"), "dangling connect path 'Pipe99.out'"),
    (("type: SimplePipe", "type: FancyPipe"), "unknown component type 'FancyPipe'"),
    (("{p: 101325.0}}\n  - {type: Cent", "{p: 1o1325}}\n  - {type: Cent"), "malformed number"),
    (("name: B", "name: A"), "duplicate component name"),
    (("version: 1", "version: 7"), "unsupported format version"),
    (("{type: SimplePipe, name: Pipe}", "{type: SimplePipe, name: Pipe, params: {colour: 1}}"),
     "no parameter 'colour'"),
])
def test_errors_carry_line_and_path(edit, fragment):
    with pytest.raises(ModelFileError, match=fragment) as info:
        parse_model(PUMP_PIPE.replace(*edit), "m.yaml")
    assert str(info.value).startswith("m.yaml:")


def test_malformed_number_reports_its_line():
    text = PUMP_PIPE.replace("{type: Sink_P, name: A, params: {p: 101325.0}}",
                             "{type: Sink_P, name: A, params: {p: 1o1325}}")
    with pytest.raises(ModelFileError, match=r"^m\.yaml:3: components\[0\]\.params\.p"):
        parse_model(text, "m.yaml")


def test_empty_and_non_mapping_documents():
    for text in ("", "[]", "components: []\nconnections: []\n"):
        with pytest.raises(ModelFileError):
            parse_model(text)
    with pytest.raises(ModelFileError):
        parse_model("components: [\n")


def test_port_names_checked_at_build():
    doc = parse_model(PUMP_PIPE.replace("[Pipe.out, B.port]", "[Pipe.outlet, B.port]"), "m.yaml")
    with pytest.raises(ModelFileError, match="m.yaml"):
        doc.build()


def test_render_round_trip():
    for name in ("fig2_network", "fig3_rankine", "pump_pipe", "wheatstone"):
        doc = load_model(name)
        again = parse_model(doc.render())
        assert again.to_dict() == doc.to_dict()
        assert reduced_dump(again.build()) == reduced_dump(doc.build())


def test_options():
    doc = parse_model(PUMP_PIPE + "options:\n  tol: 1.0e-11\n  literal_q2: true\n"
                      "  backend: {type: ideal_gas, R: 300.0, cp: 1000.0}\n")
    assert doc.solve_options().tol == 1e-11
    assert doc.solve_options(tol=1e-6).tol == 1e-6
    assert doc.backend() == IdealGasBackend(R=300.0, cp=1000.0)
    comps, _ = doc.build()
    assert "sign" not in str(comps[2].equations[0])


def test_sweep_times_list_and_validation():
    text = (fixture_dir() / "fig3_rankine.yaml").read_text()
    head = text[:text.index("sweep:")]
    doc = parse_model(head + "sweep: {times: [0.0, 5.0, 7.5], path: pump_P}\n")
    assert tuple(doc.sweep.times) == (0.0, 5.0, 7.5)
    assert doc.sweep.schedule().overrides == {}
    doc = parse_model(head + "sweep: {times: [0.0, 1.0], path: pump_P, rate: 0.0, u0: 1.7e7}\n")
    assert doc.sweep.schedule().overrides == {"pump_P.x_rate": 0.0, "pump_P.x_u0": 1.7e7}
    with pytest.raises(ModelFileError, match="strictly increasing"):
        parse_model(head + "sweep: {times: [1.0, 1.0], path: pump_P}\n")
    with pytest.raises(ModelFileError, match="names no component"):
        parse_model(text.replace("path: pump_P", "path: nobody"))
    with pytest.raises(ModelFileError, match="step > 0"):
        parse_model(text.replace("step: 10.0", "step: 0.0"))


def test_fixture_resolution(tmp_path, monkeypatch):
    assert resolve_path("pump_pipe") == fixture_dir() / "pump_pipe.yaml"
    (tmp_path / "mine.yaml").write_text(PUMP_PIPE)
    monkeypatch.setenv("ACAUSAL_FIXTURES", str(tmp_path))
    assert fixture_dir() == tmp_path
    assert len(load_model("mine").components) == 4
    with pytest.raises(FileNotFoundError):
        resolve_path("nowhere")


def test_catalog_covers_the_fixture_types():
    used = {c.type for n in ("fig2_network", "fig3_rankine", "pump_pipe", "wheatstone")
            for c in load_model(n).components}
    assert used <= set(CATALOG)


def test_isenthalpic_tag_accepts_both_spellings():
    from acausal.thermo import IdealGasBackend
    for tag in ("IsenthalpyProcess", "IsoenthalpyProcess"):
        doc = parse_model(f"""\
components:
  - {{type: {tag}, name: v, params: {{inter_state: P}}}}
  - {{type: SourceState, name: a, params: {{a: T, va: 400.0, b: P, vb: 3.0e5}}}}
  - {{type: ThermalStates, name: b, params: {{state: P, value: 1.0e5}}}}
connections:
  - [a.node, v.in]
  - [v.out, b.node]
options:
  backend: {{type: ideal_gas}}
""")
        comps, _ = doc.build()
        assert str(comps[0].equations[0]) == "(v.out.h - v.in.h)"
