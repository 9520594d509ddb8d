"""Shared test constants and oracles."""

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1) / 2


def golden_distance(rate):
    """Distance from rate to the orientation-independent set {rho, 1 - rho}."""
    return min(abs(rate - GOLDEN), abs(rate - (1 - GOLDEN)))


# one line per acceptance criterion, printed by the terminal-summary hook
ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok
