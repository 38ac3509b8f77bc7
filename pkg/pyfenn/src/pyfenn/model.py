"""Declarative model-building objects.

Everything here is a thin, name-carrying handle over the fennsim network
layer: values crossing the boundary are integers, numpy arrays, format
strings and kernel text, so a model built with these classes is bit-for-bit
identical to the same model described in a JSON file and run via the
fennsim CLI.
"""

import numpy as np

from fennsim import dslc, net
from fennsim.fxp import QFormat

DEFAULT_FORMAT = "s7_8_sat_t"


class PyFennError(ValueError):
    pass


def _parse_format(format, what: str) -> QFormat:
    if isinstance(format, QFormat):
        return format
    try:
        return QFormat.parse(format)
    except ValueError as e:
        raise PyFennError(f"{what}: {e}") from None


class Parameter:
    """A scalar kernel parameter: a value plus its fixed-point format."""

    def __init__(self, value, format=DEFAULT_FORMAT):
        self.value = float(value)
        self.format = _parse_format(format, "Parameter")


class Variable:
    """A per-neuron 16-bit state array.

    The memory space (vector or lane-local memory) is chosen during
    elaboration from how the variable is used.
    """

    def __init__(self, shape, format=DEFAULT_FORMAT, init=0):
        self.shape = int(shape)
        if self.shape <= 0:
            raise PyFennError(f"Variable: shape must be positive, "
                              f"got {shape}")
        self.format = _parse_format(format, "Variable")
        self.init = init
        self.process = None         # owning NeuronUpdateProcess
        self.local_name = None      # name inside the owning kernel


class EventContainer:
    """A spike bitfield: either the output events of a process or, when
    unowned, an input fed from the host."""

    def __init__(self, shape, num_timesteps=None):
        self.shape = int(shape)
        if self.shape <= 0:
            raise PyFennError(f"EventContainer: shape must be positive, "
                              f"got {shape}")
        self.num_timesteps = num_timesteps
        self.process = None         # owning process, if any
        self.local_name = None
        self._raster = None

    def set_raster(self, raster: np.ndarray) -> None:
        """(T, ceil(shape/32)) uint32 bitfield words, lane 0 = bit 0."""
        raster = np.asarray(raster, dtype=np.uint32)
        if raster.ndim != 2 or raster.shape[1] != (self.shape + 31) // 32:
            raise PyFennError(
                f"EventContainer: raster shape {raster.shape} does not "
                f"match ({self.num_timesteps}, {(self.shape + 31) // 32})")
        self._raster = raster

    def set_events(self, events, num_timesteps=None) -> None:
        """events: iterable of (timestep, neuron_id)."""
        T = num_timesteps or self.num_timesteps
        if T is None:
            raise PyFennError("EventContainer: num_timesteps required to "
                              "convert an event list")
        self._raster = net.events_to_raster(events, self.shape, T)


class NeuronUpdateProcess:
    """A neuron-update kernel: DSL code plus its parameters, state
    variables and output event containers."""

    def __init__(self, code: str, params: dict, vars: dict,
                 events: dict | None = None):
        self.code = code
        self.params = dict(params or {})
        self.vars = dict(vars or {})
        self.events = dict(events or {})
        if not self.vars:
            raise PyFennError("NeuronUpdateProcess: at least one variable "
                              "is required")
        for pname, p in self.params.items():
            if not isinstance(p, Parameter):
                raise PyFennError(f"{pname}: expected a Parameter, got "
                                  f"{type(p).__name__}")
        shapes = set()
        for vname, v in self.vars.items():
            if not isinstance(v, Variable):
                raise PyFennError(f"{vname}: expected a Variable, got "
                                  f"{type(v).__name__}")
            if v.process is not None:
                raise PyFennError(f"{vname}: Variable already belongs to "
                                  "another process")
            v.process, v.local_name = self, vname
            shapes.add(v.shape)
        for ename, e in self.events.items():
            if not isinstance(e, EventContainer):
                raise PyFennError(f"{ename}: expected an EventContainer, "
                                  f"got {type(e).__name__}")
            if e.process is not None:
                raise PyFennError(f"{ename}: EventContainer already belongs "
                                  "to another process")
            e.process, e.local_name = self, ename
            shapes.add(e.shape)
        if len(shapes) != 1:
            raise PyFennError(f"NeuronUpdateProcess: variables and events "
                              f"disagree on shape: {sorted(shapes)}")
        self.shape = shapes.pop()

    def kernel_source(self) -> dslc.KernelSource:
        return dslc.KernelSource(
            code=self.code,
            params={n: (p.value, p.format) for n, p in self.params.items()},
            vars={n: v.format for n, v in self.vars.items()},
            events=tuple(self.events))


class Linear:
    """Dense/compressed/delayed synaptic projection from an event container
    into a target variable."""

    def __init__(self, source: EventContainer, target: Variable,
                 format=DEFAULT_FORMAT, weight=None, encoding="dense",
                 delays=None, n_delay=None, placement="auto", raw=False):
        if not isinstance(source, EventContainer):
            raise PyFennError(f"Linear source: expected an EventContainer, "
                              f"got {type(source).__name__}")
        if not isinstance(target, Variable):
            raise PyFennError(f"Linear target: expected a Variable, got "
                              f"{type(target).__name__}")
        if target.process is None:
            raise PyFennError("Linear target: Variable does not belong to "
                              "any process")
        self.source = source
        self.target = target
        self.format = _parse_format(format, "Linear format")
        self.weight = weight
        self.encoding = encoding
        self.delays = delays
        self.n_delay = n_delay
        self.placement = placement
        self.raw = raw


class LIF:
    """Leaky integrate-and-fire neuron with threshold-subtract reset."""

    def __init__(self, shape, tau_m, v_thresh):
        self.shape = shape
        self.v = Variable(self.shape, "s7_8_sat_t")
        self.i = Variable(self.shape, "s7_8_sat_t")
        self.out_spikes = EventContainer(self.shape)

        self.process = NeuronUpdateProcess(
            """
            V = (Alpha * V) + I;
            I = 0;
            if(V >= VThresh) {
               Spike();
               V -= VThresh;
            }
            """,
            {"Alpha": Parameter(np.exp(-1.0 / tau_m), "s0_15_sat_t"),
             "VThresh": Parameter(v_thresh, "s7_8_sat_t")},
            {"V": self.v, "I": self.i},
            {"Spike": self.out_spikes})


class LI:
    """Non-spiking leaky integrator (readout layer)."""

    def __init__(self, shape, tau_m):
        self.shape = shape
        self.v = Variable(self.shape, "s7_8_sat_t")
        self.i = Variable(self.shape, "s7_8_sat_t")

        self.process = NeuronUpdateProcess(
            """
            V = (Alpha * V) + I;
            I = 0;
            """,
            {"Alpha": Parameter(np.exp(-1.0 / tau_m), "s0_15_sat_t")},
            {"V": self.v, "I": self.i})
