"""Shared helpers: the randomized two-backend program runner."""

import random

from qmoney.qstate import (
    DenseState,
    QubitSymbol,
    SumOfProductsState,
    dense_fidelity,
)

_SYMBOLS = list(QubitSymbol)


def random_symbols(rng: random.Random, n: int):
    return [rng.choice(_SYMBOLS) for _ in range(n)]


def mutate_symbols(rng: random.Random, symbols):
    """A target sequence sharing most positions with `symbols`."""
    out = list(symbols)
    for i in range(len(out)):
        if rng.random() < 0.35:
            out[i] = rng.choice(_SYMBOLS)
    return out


def random_program(rng: random.Random, max_n: int = 10, max_x: int = 5, max_meas: int = 3):
    """Draw a program: initial symbols plus a shuffled op list."""
    n = rng.randint(1, max_n)
    symbols = random_symbols(rng, n)
    ops = []
    for _ in range(rng.randint(0, max_x)):
        ops.append(("x", rng.randrange(n)))
    for _ in range(rng.randint(0, max_meas)):
        ops.append(("project", mutate_symbols(rng, symbols)))
    rng.shuffle(ops)
    return symbols, ops


def run_on_both_backends(symbols, ops, draws):
    """Execute the same op list on both backends with one draw stream.

    Returns (outcome list, per-step cross fidelities).
    """
    draws = iter(draws)
    sop = SumOfProductsState.from_symbols(symbols)
    dense = DenseState.from_symbols(symbols)
    outcomes = []
    fidelities = [dense_fidelity(sop, dense)]
    for op in ops:
        if op[0] == "x":
            sop = sop.apply_pauli_x(op[1])
            dense = dense.apply_pauli_x(op[1])
        elif op[0] == "project":
            draw = next(draws)
            out_s, sop = sop.measure_projector(op[1], draw)
            out_d, dense = dense.measure_projector(op[1], draw)
            outcomes.append((out_s, out_d))
        elif op[0] == "measure":
            _, i, basis = op
            draw = next(draws)
            bit_s, sop = sop.measure_qubit(i, basis, draw)
            bit_d, dense = dense.measure_qubit(i, basis, draw)
            outcomes.append((bit_s, bit_d))
        else:
            raise ValueError(f"unknown op {op!r}")
        fidelities.append(dense_fidelity(sop, dense))
    return outcomes, fidelities
