#!/usr/bin/env python3
# Copyright 2026 The matnav Developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
# implied. See the License for the specific language governing
# permissions and limitations under the License.
"""Independent numpy evaluation of tensor -> Debye temperature.

Prints the values frozen into tests/unit/test_elasticity.cpp.
"""
import math

import numpy as np

H = 6.62607015e-34
KB = 1.380649e-23
NA = 6.02214076e23
MASS = {"C": 12.011, "Si": 28.085, "Be": 9.0122, "O": 15.999}


def cubic(c11, c12, c44):
    c = np.zeros((6, 6))
    c[:3, :3] = c12
    np.fill_diagonal(c[:3, :3], c11)
    for i in range(3, 6):
        c[i, i] = c44
    return c


def hexagonal(c11, c12, c13, c33, c44):
    c = np.zeros((6, 6))
    c[0, 0] = c[1, 1] = c11
    c[2, 2] = c33
    c[0, 1] = c[1, 0] = c12
    c[0, 2] = c[2, 0] = c[1, 2] = c[2, 1] = c13
    c[3, 3] = c[4, 4] = c44
    c[5, 5] = (c11 - c12) / 2
    return c


def theta(c, masses, volume):
    s = np.linalg.inv(c)
    bv = (c[0, 0] + c[1, 1] + c[2, 2] + 2 * (c[0, 1] + c[0, 2] + c[1, 2])) / 9
    gv = (c[0, 0] + c[1, 1] + c[2, 2] - c[0, 1] - c[0, 2] - c[1, 2]
          + 3 * (c[3, 3] + c[4, 4] + c[5, 5])) / 15
    br = 1 / (s[0, 0] + s[1, 1] + s[2, 2] + 2 * (s[0, 1] + s[0, 2] + s[1, 2]))
    gr = 15 / (4 * (s[0, 0] + s[1, 1] + s[2, 2]) - 4 * (s[0, 1] + s[0, 2] + s[1, 2])
               + 3 * (s[3, 3] + s[4, 4] + s[5, 5]))
    b, g = (bv + br) / 2, (gv + gr) / 2
    rho = sum(masses) / (NA * volume * 1e-24) * 1000
    vl = math.sqrt((b + 4 * g / 3) * 1e9 / rho)
    vt = math.sqrt(g * 1e9 / rho)
    vs = ((2 / vt**3 + 1 / vl**3) / 3) ** (-1 / 3)
    n = len(masses)
    return H / KB * (3 * n / (4 * math.pi * volume * 1e-30)) ** (1 / 3) * vs


def main():
    a = 3.567
    print("diamond", repr(theta(cubic(1079, 124, 578), [MASS["C"]] * 8, a**3)))
    a = 4.3596
    print("3C-SiC", repr(theta(cubic(390, 142, 256), [MASS["Si"]] * 4 + [MASS["C"]] * 4, a**3)))
    a, c = 2.698, 4.380
    vol = math.sqrt(3) / 2 * a * a * c
    print("BeO", repr(theta(hexagonal(460.6, 126.5, 88.5, 491.6, 147.7),
                            [MASS["Be"]] * 2 + [MASS["O"]] * 2, vol)))


if __name__ == "__main__":
    main()
