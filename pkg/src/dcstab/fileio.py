"""TOML/JSON loaders for network topologies and component tables.

Network files (`dcstab-network-v1`) declare buses, edges, device parameter
tables, and an optional time-domain scenario block. Component files
(`dcstab-components-v1`) declare standalone admittance models for the
decentralized certificate, with converter entries optionally carrying a list
of operating voltages to test.

Line lengths may be given explicitly (``length_km = 0.97``) or declared
"random", in which case they are drawn as mean + sigma * N(0,1) from a seeded
generator in file order (edges first, then source devices in bus order); the
drawn values are reported back for reproducibility.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .certification import CertComponent, ComponentSet
from .components import (BoostConverterModel, BuckConverterModel, Compensator,
                         CurrentCompensator, LeadLag, LineModel, PI, PIGain,
                         PlantPILoad, SourceModel, VoltageCompensator)
from .network import Bus, Edge, NetworkGraph

NETWORK_SCHEMA = "dcstab-network-v1"
COMPONENTS_SCHEMA = "dcstab-components-v1"


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def load_document(path) -> dict:
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            with open(path, "rb") as fh:
                return json.load(fh)
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as err:
        raise InputError(f"{path}: {err.strerror}") from err
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise InputError(f"{path}: parse error: {err}") from err


def _require(tbl: dict, key: str, ctx: str):
    if key not in tbl:
        raise InputError(f"{ctx}: missing required field {key!r}")
    return tbl[key]


def build_compensator(tbl: dict, ctx: str) -> Compensator:
    kind = _require(tbl, "type", ctx)
    delay = float(tbl.get("tau_d", 0.0))
    if kind == "leadlag":
        variant = LeadLag(Gc_inf=float(_require(tbl, "Gc_inf", ctx)),
                          wL=float(_require(tbl, "wL", ctx)),
                          wz=float(_require(tbl, "wz", ctx)),
                          wp=float(_require(tbl, "wp", ctx)))
    elif kind == "pi":
        variant = PI(Gi=float(_require(tbl, "Gi", ctx)),
                     wi=float(_require(tbl, "wi", ctx)))
    elif kind == "pigain":
        variant = PIGain(K=float(_require(tbl, "K", ctx)),
                         tau_i=float(_require(tbl, "tau_i", ctx)))
    else:
        raise InputError(f"{ctx}: unknown compensator type {kind!r}")
    return Compensator(variant, delay=delay)


def _line_from_table(tbl: dict, ctx: str, defaults: dict, draw) -> LineModel:
    if "R" in tbl:
        R = float(tbl["R"])
        if "L" in tbl:
            return LineModel(R, float(tbl["L"]))
        tau = float(tbl.get("tau", defaults.get("tau", 1e-3)))
        return LineModel.from_tau(R, tau)
    r_per_km = float(tbl.get("r_per_km", defaults.get("r_per_km", 0.1)))
    tau = float(tbl.get("tau", defaults.get("tau", 1e-3)))
    length = tbl.get("length_km", "random")
    if isinstance(length, str):
        if length != "random":
            raise InputError(f"{ctx}: length_km must be a number or 'random'")
        length = draw(ctx)
    return LineModel.from_length(float(length), r_per_km, tau)


def build_buck(tbl: dict, ctx: str, V: float) -> BuckConverterModel:
    comp = build_compensator(_require(tbl, "compensator", ctx), f"{ctx}.compensator")
    return BuckConverterModel(
        V=V,
        R=float(_require(tbl, "R", ctx)),
        L=float(_require(tbl, "L", ctx)),
        C=float(_require(tbl, "C", ctx)),
        D=float(_require(tbl, "D", ctx)),
        H=float(_require(tbl, "H", ctx)),
        Vm=float(_require(tbl, "Vm", ctx)),
        compensator=comp,
        Cf=float(tbl.get("Cf", 0.0)),
    )


def build_boost(tbl: dict, ctx: str, V: float) -> BoostConverterModel:
    return BoostConverterModel(
        V=V,
        R=float(_require(tbl, "R", ctx)),
        L=float(_require(tbl, "L", ctx)),
        C=float(_require(tbl, "C", ctx)),
        Dp=float(_require(tbl, "Dp", ctx)),
        current_comp=CurrentCompensator(
            G_cm=float(_require(tbl, "G_cm", ctx)),
            w_c1=float(_require(tbl, "w_c1", ctx)),
            w_c2=float(_require(tbl, "w_c2", ctx))),
        voltage_comp=VoltageCompensator(
            G_vm=float(_require(tbl, "G_vm", ctx)),
            w_v1=float(_require(tbl, "w_v1", ctx))),
        Cf=float(tbl.get("Cf", 0.0)),
    )


def build_plant_pi(tbl: dict, ctx: str) -> PlantPILoad:
    return PlantPILoad(wn=float(_require(tbl, "wn", ctx)),
                       zeta=float(_require(tbl, "zeta", ctx)),
                       K=float(_require(tbl, "K", ctx)),
                       tau_i=float(_require(tbl, "tau_i", ctx)))


def _voltage_value(raw, ctx: str):
    """'operating' resolves later from the DC solve; numbers pass through."""
    if isinstance(raw, str):
        if raw != "operating":
            raise InputError(f"{ctx}: V must be a number or 'operating'")
        return float("nan")
    return float(raw)


@dataclass
class LoadedNetwork:
    net: NetworkGraph
    scenario: dict
    drawn_lengths: dict = field(default_factory=dict)
    seed: int | None = None


def load_network(path, seed: int = 0, controller: str | None = None) -> LoadedNetwork:
    doc = load_document(path)
    if doc.get("schema") != NETWORK_SCHEMA:
        raise InputError(f"{path}: expected schema {NETWORK_SCHEMA!r}, "
                         f"got {doc.get('schema')!r}")
    defaults = doc.get("defaults", {})
    devices = doc.get("devices", {})
    rng = np.random.default_rng(seed)
    drawn = {}
    mean = float(defaults.get("length_mean_km", 1.0))
    sigma = float(defaults.get("length_sigma_km", 0.1))

    def draw(ctx):
        val = float(mean + sigma * rng.standard_normal())
        if val <= 0.0:
            raise InputError(f"{ctx}: drawn length nonpositive; shrink sigma")
        drawn[ctx] = val
        return val

    def device_table(name, ctx):
        if name not in devices:
            raise InputError(f"{ctx}: device table {name!r} not defined")
        return devices[name]

    edges = []
    for k, etbl in enumerate(doc.get("edges", [])):
        pair = _require(etbl, "buses", f"edges[{k}]")
        if len(pair) != 2:
            raise InputError(f"edges[{k}]: 'buses' must name two bus ids")
        line = _line_from_table(etbl, f"edge_{pair[0]}_{pair[1]}", defaults, draw)
        edges.append(Edge(int(pair[0]), int(pair[1]), line))

    buses = []
    for btbl in doc.get("buses", []):
        ctx = f"bus {btbl.get('id', '?')}"
        bid = int(_require(btbl, "id", ctx))
        kind = _require(btbl, "kind", ctx)
        dev_name = btbl.get("device", "")
        device = None
        if kind == "source":
            tbl = device_table(dev_name, ctx)
            if tbl.get("kind") != "source":
                raise InputError(f"{ctx}: device {dev_name!r} is not a source")
            series = _line_from_table(tbl, f"source_{bid}", defaults, draw)
            device = SourceModel(V_set=float(_require(tbl, "Vs", ctx)), line=series)
        elif kind == "load":
            tbl = dict(device_table(dev_name, ctx))
            if controller:
                alts = tbl.get("compensators", {})
                if controller not in alts:
                    raise InputError(
                        f"{ctx}: device {dev_name!r} has no compensator "
                        f"variant {controller!r}")
                tbl["compensator"] = alts[controller]
            dkind = tbl.get("kind")
            if dkind == "buck":
                device = build_buck(tbl, ctx, _voltage_value(tbl.get("V", "operating"), ctx))
            elif dkind == "boost":
                device = build_boost(tbl, ctx, _voltage_value(tbl.get("V", "operating"), ctx))
            elif dkind == "plant_pi":
                device = build_plant_pi(tbl, ctx)
            else:
                raise InputError(f"{ctx}: unknown load device kind {dkind!r}")
        elif kind == "junction":
            device = None
        else:
            raise InputError(f"{ctx}: unknown bus kind {kind!r}")
        buses.append(Bus(bid, kind, device, dev_name))

    band = defaults.get("operating_band", [0.0, float("inf")])
    net = NetworkGraph(buses, edges, operating_band=tuple(band),
                       name=doc.get("name", Path(path).stem))
    return LoadedNetwork(net=net, scenario=doc.get("scenario", {}),
                         drawn_lengths=drawn, seed=seed)


@dataclass
class LoadedComponents:
    component_set: ComponentSet
    ids: list


def load_components(path) -> LoadedComponents:
    doc = load_document(path)
    if doc.get("schema") != COMPONENTS_SCHEMA:
        raise InputError(f"{path}: expected schema {COMPONENTS_SCHEMA!r}, "
                         f"got {doc.get('schema')!r}")
    members = []
    for k, tbl in enumerate(doc.get("components", [])):
        ctx = f"components[{k}]"
        cid = _require(tbl, "id", ctx)
        kind = _require(tbl, "kind", ctx)
        if kind == "line":
            line = _line_from_table(tbl, ctx, {}, lambda c: 1.0)
            members.append(CertComponent(cid, _line_gen(line)))
        elif kind in ("buck", "boost"):
            volts = tbl.get("V", [28.0])
            if not isinstance(volts, list):
                volts = [volts]
            for V in volts:
                model = (build_buck if kind == "buck" else build_boost)(
                    tbl, ctx, float(V))
                label = f"{cid}@{V:g}V" if len(volts) > 1 else cid
                members.append(CertComponent(label, _model_gen(model)))
        elif kind == "plant_pi":
            members.append(CertComponent(cid, _model_gen(build_plant_pi(tbl, ctx))))
        else:
            raise InputError(f"{ctx}: unknown component kind {kind!r}")
    if not members:
        raise InputError(f"{path}: no components defined")
    return LoadedComponents(component_set=ComponentSet(tuple(members)),
                            ids=[m.id for m in members])


def _line_gen(line):
    return lambda alpha: line.admittance(alpha)


def _model_gen(model):
    return lambda alpha: model.admittance(alpha)


def components_from_network(loaded: LoadedNetwork, alpha_resolved=None) -> ComponentSet:
    """Certificate component set implied by a network: its distinct lines and
    resolved shunt devices."""
    net = loaded.net.resolved()
    members = []
    seen_tau = set()
    for e in net.edges:
        key = round(e.line.tau, 12)
        if key not in seen_tau:
            seen_tau.add(key)
            members.append(CertComponent(f"line_tau{e.line.tau:g}", _line_gen(e.line)))
    for bus in net.buses:
        if bus.kind == "load" and bus.device is not None:
            members.append(CertComponent(f"{bus.device_id or 'load'}@bus{bus.id}",
                                         _model_gen(bus.device)))
    return ComponentSet(tuple(members))
