"""Defining a custom LIF neuron from scratch with NeuronUpdateProcess
(the same class ships as pyfenn.LIF) and running it for a few steps."""

import numpy as np

from pyfenn import (EventContainer, Linear, NeuronUpdateProcess, Parameter,
                    Variable, run)


class LIF:
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
            {"Alpha": Parameter(np.exp(-1.0 / tau_m),
                                "s0_15_sat_t"),
             "VThresh": Parameter(v_thresh,
                                  "s7_8_sat_t")},
            {"V": self.v, "I": self.i},
            {"Spike": self.out_spikes})


def main():
    num_timesteps = 20
    neurons = LIF(32, tau_m=20.0, v_thresh=1.0)

    stimulus = EventContainer(32, num_timesteps)
    drive = Linear(stimulus, neurons.i,
                   weight=np.full((32, 32), 0.04))
    stimulus.set_events([(t, n) for t in range(num_timesteps)
                         for n in range(32) if (t + n) % 3 == 0])

    result = run([stimulus, neurons, drive], num_timesteps,
                 record=[neurons.v])
    spikes = int(np.bitwise_count(result.spikes[neurons.out_spikes]).sum())
    v = result.recorded[neurons.v] / 256.0       # s7_8 -> volts
    print(f"{num_timesteps} steps, {spikes} spikes, "
          f"{result.cycles} cycles")
    print(f"final V: min {v[-1].min():.3f} max {v[-1].max():.3f}")


if __name__ == "__main__":
    main()
