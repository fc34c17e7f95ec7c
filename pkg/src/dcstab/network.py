"""Microgrid graph: admittance assembly, DC operating point, Schur reduction.

Buses carry shunt devices (sources behind series lines, regulated converter
loads); edges are RL lines. The dynamic admittance matrix stacks the edge
blocks [[Y, -Y], [-Y, Y]] with diagonal shunt contributions; ideal sources
appear as direct paths to ground through their series line.

The DC operating point treats each ideal source as a known-voltage node
behind its series-line conductance and each regulated converter as the
constant-conductance reflection of its load (the converter runs at a fixed
duty ratio in the power-flow sense, so the shunt is +D^2/R even though the
regulated small-signal admittance at zero frequency is -D^2/R).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .components import (BoostConverterModel, BuckConverterModel, LineModel,
                         PlantPILoad, SourceModel)


class NetworkError(ValueError):
    pass


class NoseCurveError(RuntimeError):
    """The DC solve is singular: operating point at/beyond the nose curve."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str                      # "source" | "load" | "junction"
    device: object = None          # SourceModel | converter model | None
    device_id: str = ""

    def __post_init__(self):
        if self.kind not in ("source", "load", "junction"):
            raise NetworkError(f"unknown bus kind {self.kind!r}")
        if self.kind == "source" and not isinstance(self.device, SourceModel):
            raise NetworkError(f"bus {self.id}: source bus needs a SourceModel")


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    line: LineModel

    def __post_init__(self):
        if self.i == self.j:
            raise NetworkError(f"self-loop at bus {self.i}")


@dataclass(frozen=True)
class SteadyState:
    V0: np.ndarray                 # per-bus volts, network bus order
    I0: np.ndarray                 # per-bus net injection (amps, + into bus)
    source_currents: dict          # bus id -> amps delivered by its source
    load_voltages: dict            # bus id -> volts at converter input
    residual: float


def _dc_conductance(device) -> float:
    """Constant-conductance load reflection used by the DC power-flow solve."""
    if device is None or isinstance(device, SourceModel):
        return 0.0
    if isinstance(device, BuckConverterModel):
        return device.D * device.D / device.R
    if isinstance(device, BoostConverterModel):
        return 1.0 / (device.Dp * device.Dp * device.R)
    if isinstance(device, PlantPILoad):
        return float(device.plant()(0.0).real)
    raise NetworkError(f"no DC model for {type(device).__name__}")


class NetworkGraph:
    """Immutable microgrid graph."""

    def __init__(self, buses, edges, operating_band=(0.0, np.inf), name=""):
        self.buses = tuple(buses)
        self.edges = tuple(edges)
        self.operating_band = operating_band
        self.name = name
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate bus ids")
        self._pos = {b.id: k for k, b in enumerate(self.buses)}
        for e in self.edges:
            if e.i not in self._pos or e.j not in self._pos:
                raise NetworkError(f"edge ({e.i},{e.j}) references unknown bus")
        if not any(b.kind == "source" for b in self.buses):
            raise NetworkError("network needs at least one source")
        self._check_connected()
        for b in self.buses:
            if b.kind == "load" and b.device is not None:
                cf = getattr(b.device, "Cf", None)
                if cf is not None and cf == 0.0:
                    warnings.warn(
                        f"bus {b.id}: load without filter capacitance; "
                        f"time-domain simulation will reject this network",
                        stacklevel=2)

    @property
    def n(self) -> int:
        return len(self.buses)

    def pos(self, bus_id: int) -> int:
        return self._pos[bus_id]

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.pos(bus_id)]

    def _check_connected(self):
        if not self.buses:
            raise NetworkError("empty network")
        adj = {b.id: set() for b in self.buses}
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        seen = {self.buses[0].id}
        stack = [self.buses[0].id]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != self.n:
            raise NetworkError("network graph is not connected")

    def incidence(self) -> np.ndarray:
        """Signed nodal incidence matrix, one row per edge."""
        E = np.zeros((len(self.edges), self.n))
        for k, e in enumerate(self.edges):
            E[k, self.pos(e.i)] = 1.0
            E[k, self.pos(e.j)] = -1.0
        return E

    # -- dynamic admittance ------------------------------------------------

    def shunt_admittance(self, bus: Bus, alpha: float):
        if bus.device is None:
            return None
        if isinstance(bus.device, SourceModel):
            return bus.device.admittance()
        return bus.device.rational_admittance(alpha)

    def assemble(self, s: complex, alpha: float) -> np.ndarray:
        """Y(s, alpha) as a dense complex matrix."""
        Y = np.zeros((self.n, self.n), dtype=complex)
        for e in self.edges:
            y = e.line.admittance()(s)
            a, b = self.pos(e.i), self.pos(e.j)
            Y[a, a] += y
            Y[b, b] += y
            Y[a, b] -= y
            Y[b, a] -= y
        for k, bus in enumerate(self.buses):
            ysh = self.shunt_admittance(bus, alpha)
            if ysh is not None:
                Y[k, k] += ysh(s)
        return Y

    def resolved(self, default_converter_voltage: float | None = None) -> "NetworkGraph":
        """Copy with converter input voltages set from the DC operating point.

        Converters whose V field is NaN (declared 'operating' in network
        files) receive their steady-state bus voltage.
        """
        ss = self.steady_state()
        lo, hi = self.operating_band
        new_buses = []
        for k, bus in enumerate(self.buses):
            dev = bus.device
            if isinstance(dev, (BuckConverterModel, BoostConverterModel)):
                if np.isnan(dev.V):
                    v = float(ss.V0[k]) if default_converter_voltage is None \
                        else default_converter_voltage
                    dev = dev.with_voltage(v)
                if not (lo <= dev.V <= hi):
                    raise NetworkError(
                        f"bus {bus.id}: operating voltage {dev.V:.3f} V outside "
                        f"declared band [{lo}, {hi}]")
                bus = replace(bus, device=dev)
            new_buses.append(bus)
        return NetworkGraph(new_buses, self.edges, self.operating_band, self.name)

    # -- DC operating point --------------------------------------------------

    def steady_state(self) -> SteadyState:
        """Operating point from the linear DC solve.

        Ideal source nodes (known voltage) sit behind their series-line
        conductances; the unknown block is solved as V_l = -Yb4^{-1} Yb3 Vs.
        """
        src = [b for b in self.buses if b.kind == "source"]
        ns = len(src)
        n = self.n
        N = ns + n  # ideal nodes first, physical buses after
        Yb = np.zeros((N, N))

        def stamp(a, b, g):
            Yb[a, a] += g
            Yb[b, b] += g
            Yb[a, b] -= g
            Yb[b, a] -= g

        for k, b in enumerate(src):
            g = 1.0 / b.device.line.resistance
            stamp(k, ns + self.pos(b.id), g)
        for e in self.edges:
            stamp(ns + self.pos(e.i), ns + self.pos(e.j),
                  1.0 / e.line.resistance)
        for k, b in enumerate(self.buses):
            Yb[ns + k, ns + k] += _dc_conductance(b.device)

        Vs = np.array([b.device.V_set for b in src])
        Yb3 = Yb[ns:, :ns]
        Yb4 = Yb[ns:, ns:]
        try:
            Vl = np.linalg.solve(Yb4, -Yb3 @ Vs)
        except np.linalg.LinAlgError as err:
            raise NoseCurveError(
                "DC solve singular: operating point at/beyond the nose curve"
            ) from err
        cond = np.linalg.cond(Yb4)
        if not np.isfinite(cond) or cond > 1e12:
            raise NoseCurveError(
                f"DC solve ill-conditioned (cond={cond:.3g}): operating point "
                f"at/beyond the nose curve")

        Is = Yb[:ns, :ns] @ Vs + Yb[:ns, ns:] @ Vl
        resid = float(np.max(np.abs(Yb4 @ Vl + Yb3 @ Vs)))
        source_currents = {b.id: float(Is[k]) for k, b in enumerate(src)}
        injections = np.zeros(n)
        for k, b in enumerate(src):
            injections[self.pos(b.id)] += float(Is[k])
        load_voltages = {}
        for k, b in enumerate(self.buses):
            g = _dc_conductance(b.device)
            if g > 0.0:
                injections[k] -= g * Vl[k]
                load_voltages[b.id] = float(Vl[k])
        return SteadyState(V0=Vl, I0=injections,
                           source_currents=source_currents,
                           load_voltages=load_voltages, residual=resid)

    # -- Schur reduction -------------------------------------------------------

    def effective_admittance(self, bus_id: int, alpha: float,
                             exclude_shunt_at_bus: bool = False):
        """Pointwise grid admittance seen from one bus: Y1 - Y2 Y4^{-1} Y3.

        Returns omega -> complex (nan at samples where the interior block is
        singular). With ``exclude_shunt_at_bus`` the bus's own shunt device is
        removed first, giving the pure grid-side admittance for minor-loop
        tests.
        """
        k = self.pos(bus_id)
        net = self
        if exclude_shunt_at_bus and self.buses[k].device is not None:
            buses = list(self.buses)
            buses[k] = replace(buses[k], device=None, kind="junction",
                               device_id="")
            net = NetworkGraph(buses, self.edges, self.operating_band, self.name)

        others = [i for i in range(self.n) if i != k]

        def y_o(omega):
            w = np.atleast_1d(np.asarray(omega, dtype=float))
            out = np.empty(w.shape, dtype=complex)
            for idx, wi in enumerate(w):
                Y = net.assemble(1j * wi, alpha)
                Y1 = Y[k, k]
                Y2 = Y[k, others]
                Y3 = Y[others, k]
                Y4 = Y[np.ix_(others, others)]
                try:
                    out[idx] = Y1 - Y2 @ np.linalg.solve(Y4, Y3)
                except np.linalg.LinAlgError:
                    out[idx] = np.nan
            return out if np.ndim(omega) else complex(out[0])

        return y_o
