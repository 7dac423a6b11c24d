"""Unit conversions used at the configuration and report boundaries."""

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(x_w):
    return 10.0 * np.log10(np.asarray(x_w, dtype=float)) + 30.0


def db_to_variance(x_db):
    """Phase-increment variance in rad^2 from dB; ``-inf`` maps to 0."""
    x = np.asarray(x_db, dtype=float)
    return np.where(np.isneginf(x), 0.0, 10.0 ** (x / 10.0))
