"""Evolvable perceptron controllers: construction, activation, mutation.

The standard robot controller is an 8-10-2 perceptron with tanh units and a
bias on every neuron, which is 9*10 + 11*2 = 112 weights. Weight layout in
the flat genotype vector: hidden unit 0's 8 input weights then its bias,
hidden unit 1's, ..., then motor 0's 10 hidden weights plus bias, then
motor 1's.
"""

import math
from dataclasses import dataclass

import numpy as np

N_INPUTS = 8
N_HIDDEN = 10
N_OUTPUTS = 2
N_WEIGHTS = (N_INPUTS + 1) * N_HIDDEN + (N_HIDDEN + 1) * N_OUTPUTS  # 112

# fresh weights are drawn N(0, 0.1); 0.1 is a variance, so std = sqrt(0.1)
DEFAULT_WEIGHT_STD = math.sqrt(0.1)
DEFAULT_SIGMA = 0.2


@dataclass
class Genotype:
    """Flat weight vector plus the mutation step-size it was created with.

    Treated as an immutable value: mutation returns a new Genotype.
    """

    weights: np.ndarray
    sigma: float = DEFAULT_SIGMA

    def hidden_matrix(self):
        """(N_HIDDEN, 9) view: input weights columns 0..7, bias column 8."""
        return self.weights[: (N_INPUTS + 1) * N_HIDDEN].reshape(N_HIDDEN, N_INPUTS + 1)

    def output_matrix(self):
        """(N_OUTPUTS, 11) view: hidden weights columns 0..9, bias column 10."""
        return self.weights[(N_INPUTS + 1) * N_HIDDEN :].reshape(N_OUTPUTS, N_HIDDEN + 1)


def random_genotype(rng, weight_std=DEFAULT_WEIGHT_STD, sigma=DEFAULT_SIGMA):
    """Fresh controller, weights i.i.d. N(0, weight_std^2)."""
    return Genotype(weights=rng.standard_normal(N_WEIGHTS) * weight_std, sigma=sigma)


def activate(genotype, inputs):
    """Forward pass; 8 sensor activations in, 2 motor commands in (-1, 1) out.

    Scalar loops on purpose: the compiled episode kernel evaluates the same
    expressions in the same order, so the two paths agree bit for bit.
    """
    if len(inputs) != N_INPUTS:
        raise ValueError(f"expected {N_INPUTS} inputs, got {len(inputs)}")
    w_hidden = genotype.hidden_matrix()
    w_out = genotype.output_matrix()
    hidden = [0.0] * N_HIDDEN
    for j in range(N_HIDDEN):
        s = 0.0
        for i in range(N_INPUTS):
            s += w_hidden[j, i] * inputs[i]
        s += w_hidden[j, N_INPUTS]
        hidden[j] = math.tanh(s)
    motors = [0.0, 0.0]
    for k in range(N_OUTPUTS):
        s = 0.0
        for j in range(N_HIDDEN):
            s += w_out[k, j] * hidden[j]
        motors[k] = math.tanh(s + w_out[k, N_HIDDEN])
    return motors[0], motors[1]


def mutate(genotype, rng):
    """Isotropic Gaussian mutation: every weight moves by sigma * N(0, 1).

    The child inherits the parent's sigma; step-size adaptation is the
    evolution loop's job.
    """
    child = genotype.weights + genotype.sigma * rng.standard_normal(genotype.weights.size)
    return Genotype(weights=child, sigma=genotype.sigma)


def save_genotype(path, genotype):
    """One CSV line: the weights then sigma, 17 significant digits each."""
    values = [f"{w:.17g}" for w in genotype.weights] + [f"{genotype.sigma:.17g}"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(values) + "\n")


def format_genotype(genotype):
    values = [f"{w:.17g}" for w in genotype.weights] + [f"{genotype.sigma:.17g}"]
    return ",".join(values)


def load_genotype(path):
    with open(path, encoding="utf-8") as fh:
        line = fh.readline().strip()
    return parse_genotype(line)


def parse_genotype(line):
    values = [float(v) for v in line.split(",")]
    if len(values) < 2:
        raise ValueError("genotype line must hold weights plus sigma")
    return Genotype(weights=np.array(values[:-1]), sigma=values[-1])
