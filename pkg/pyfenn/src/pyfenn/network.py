"""Building and running a network from model objects.

`Network` walks the handed-in objects (neuron wrappers, processes,
projections, event containers), lowers them onto a `fennsim.net.Model`
and runs it on the instruction simulator. Populations and input
containers get deterministic names (`pop0`, `pop1`, ... / `input0`, ...)
in discovery order, so the same network can be reproduced exactly as a
JSON model file for the fennsim CLI.
"""

from dataclasses import dataclass, field

import numpy as np

from fennsim import net

from .model import (EventContainer, Linear, NeuronUpdateProcess,
                    PyFennError, Variable)


@dataclass
class RunResult:
    spikes: dict                       # EventContainer -> (T, n_words) u32
    recorded: dict                     # Variable -> (T, n) int array
    cycles: int = 0
    instret: int = 0
    sops: int = 0
    region_cycles: dict = field(default_factory=dict)


class Network:
    def __init__(self, *objects, name: str = "model"):
        self.name = name
        self._processes: list[NeuronUpdateProcess] = []
        self._linears: list[Linear] = []
        self._inputs: list[EventContainer] = []
        for obj in objects:
            self._add(obj)
        self._pop_names = {p: f"pop{i}"
                           for i, p in enumerate(self._processes)}
        self._input_names = {c: f"input{i}"
                             for i, c in enumerate(self._inputs)}
        self.model = self._build()

    # -- collection --------------------------------------------------------

    def _add(self, obj) -> None:
        if isinstance(obj, Linear):
            if obj not in self._linears:
                self._linears.append(obj)
                self._add(obj.source)
                self._add_process(obj.target.process)
        elif isinstance(obj, NeuronUpdateProcess):
            self._add_process(obj)
        elif isinstance(obj, EventContainer):
            if obj.process is not None:
                self._add_process(obj.process)
            elif obj not in self._inputs:
                self._inputs.append(obj)
        elif isinstance(obj, Variable):
            if obj.process is None:
                raise PyFennError("Variable does not belong to any process")
            self._add_process(obj.process)
        elif hasattr(obj, "process"):
            self._add_process(obj.process)
        else:
            raise PyFennError(f"cannot add a {type(obj).__name__} to a "
                              "network")

    def _add_process(self, proc: NeuronUpdateProcess) -> None:
        if proc not in self._processes:
            self._processes.append(proc)

    # -- lowering ----------------------------------------------------------

    def name_of(self, obj) -> str:
        """The fennsim model name of a process, neuron wrapper or input."""
        if isinstance(obj, EventContainer) and obj.process is None:
            return self._input_names[obj]
        proc = obj if isinstance(obj, NeuronUpdateProcess) \
            else getattr(obj, "process", None) or obj.process
        return self._pop_names[proc]

    def _build(self) -> net.Model:
        m = net.Model(self.name)
        for proc in self._processes:
            pname = self._pop_names[proc]
            variables = {vn: net.Variable(vn, proc.shape, v.format, v.init)
                         for vn, v in proc.vars.items()}
            spike_event = next(iter(proc.events), "Spike")
            m.add_population(net.Population(pname, proc.shape,
                                            proc.kernel_source(), variables,
                                            spike_event=spike_event))
        for cont in self._inputs:
            m.add_input(self._input_names[cont], cont.shape)
        for j, lin in enumerate(self._linears):
            if lin.weight is None:
                raise PyFennError(f"Linear #{j} "
                                  f"({self.name_of(lin.source)} -> "
                                  f"{self.name_of(lin.target.process)}): "
                                  "weight has not been set")
            src = lin.source
            src_name = (self._input_names[src] if src.process is None
                        else self._pop_names[src.process])
            conn = net.Connection(
                src_name, self._pop_names[lin.target.process],
                lin.encoding, np.asarray(lin.weight), fmt=lin.format,
                target=lin.target.local_name, delays=lin.delays,
                n_delay=lin.n_delay if lin.n_delay else 1,
                placement=lin.placement, raw=lin.raw)
            m.connect(conn)
        return m

    # -- execution ---------------------------------------------------------

    def run(self, num_timesteps: int, record=(), seed: int = 0) -> RunResult:
        """Run on the instruction simulator. ``record`` is an iterable of
        Variable objects sampled after every step."""
        T = num_timesteps
        inputs = {}
        for cont in self._inputs:
            if cont._raster is None:
                raise PyFennError(f"input {self._input_names[cont]!r}: no "
                                  "spikes set (set_events/set_raster)")
            inputs[self._input_names[cont]] = cont._raster
        rec_keys = []
        for var in record:
            if not isinstance(var, Variable) or var.process is None:
                raise PyFennError("record entries must be process variables")
            rec_keys.append((self._pop_names[var.process], var.local_name))
        elab = net.elaborate(self.model, seed=seed)
        out = net.run(elab, inputs, T, record=rec_keys)
        spikes = {}
        for proc in self._processes:
            for ename, cont in proc.events.items():
                if ename == self.model.populations[
                        self._pop_names[proc]].spike_event:
                    spikes[cont] = out.spikes[self._pop_names[proc]]
        recorded = {var: out.recorded[key]
                    for var, key in zip(record, rec_keys)}
        return RunResult(spikes=spikes, recorded=recorded,
                         cycles=out.cycles, instret=out.instret,
                         sops=out.sops, region_cycles=out.region_cycles)


def run(objects, num_timesteps: int, record=(), seed: int = 0) -> RunResult:
    """One-shot convenience wrapper: build a Network and run it."""
    return Network(*objects).run(num_timesteps, record=record, seed=seed)
