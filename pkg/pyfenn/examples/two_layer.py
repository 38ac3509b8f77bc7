"""A simple SNN with one hidden layer, defined with the shipped neuron
classes and run end-to-end on the simulator."""

import numpy as np

from pyfenn import LI, LIF, EventContainer, Linear, run

input_shape = 64
hidden_shape = 128
output_shape = 10
num_timesteps = 50


def main():
    rng = np.random.default_rng(1234)

    # Input spikes
    input_spikes = EventContainer(input_shape,
                                  num_timesteps)
    # Neurons
    hidden = LIF(hidden_shape, 20.0, 1.0)
    output = LI(output_shape, 20.0)
    # Synapses
    input_hidden = Linear(input_spikes, hidden.i)
    hidden_output = Linear(hidden.out_spikes, output.i,
                           "s9_6_sat_t")

    input_hidden.weight = rng.uniform(0.0, 0.25, (input_shape, hidden_shape))
    hidden_output.weight = rng.uniform(0.0, 0.05, (hidden_shape, output_shape))
    events = [(int(t), int(n))
              for t, n in zip(*np.nonzero(rng.random(
                  (num_timesteps, input_shape)) < 0.1))]
    input_spikes.set_events(events)

    result = run([input_spikes, hidden, output,
                  input_hidden, hidden_output],
                 num_timesteps, record=[output.v])
    spikes = int(np.bitwise_count(result.spikes[hidden.out_spikes]).sum())
    readout = result.recorded[output.v][-1] / 256.0
    print(f"{num_timesteps} steps, {spikes} hidden spikes, "
          f"{result.cycles} cycles, {result.sops} SOPs")
    print("readout:", np.array2string(readout, precision=3))


if __name__ == "__main__":
    main()
