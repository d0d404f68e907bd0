import math

import numpy as np
import pytest

from gradetwo import meshes, spaces


@pytest.fixture(scope="session")
def mesh8():
    return meshes.unit_square_mesh(8)


@pytest.fixture(scope="session")
def mesh16():
    return meshes.unit_square_mesh(16)


@pytest.fixture(scope="session")
def spaces8(mesh8):
    return spaces.build_spaces(mesh8)


@pytest.fixture(scope="session")
def spaces16(mesh16):
    return spaces.build_spaces(mesh16)


def ring_mesh(k=1):
    """Square [0,3]^2 with the middle third removed: two boundary loops.

    Each of the 8 remaining blocks is split into k*k squares of 2 triangles.
    Outer boundary edges carry marker 1, the hole's marker 2.  Interior
    vertices of the hole stay in the vertex array unreferenced.
    """
    n = 3 * k
    xs = np.linspace(0.0, 3.0, n + 1)
    vx, vy = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.stack([vx.ravel(), vy.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    def in_hole(i, j):
        return k <= i < 2 * k and k <= j < 2 * k

    tris = []
    for i in range(n):
        for j in range(n):
            if in_hole(i, j):
                continue
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    bedges, markers = [], []
    for i in range(n):
        bedges += [(vid(i, 0), vid(i + 1, 0)), (vid(i, n), vid(i + 1, n))]
        markers += [1, 1]
        bedges += [(vid(0, i), vid(0, i + 1)), (vid(n, i), vid(n, i + 1))]
        markers += [1, 1]
    for t in range(k):
        bedges += [
            (vid(k + t, k), vid(k + t + 1, k)),
            (vid(k + t, 2 * k), vid(k + t + 1, 2 * k)),
            (vid(k, k + t), vid(k, k + t + 1)),
            (vid(2 * k, k + t), vid(2 * k, k + t + 1)),
        ]
        markers += [2, 2, 2, 2]
    return meshes.Mesh(vertices, np.asarray(tris), np.asarray(bedges),
                       np.asarray(markers))


def fd_gradient(f, x, y, h=1e-6):
    return ((f(x + h, y) - f(x - h, y)) / (2 * h),
            (f(x, y + h) - f(x, y - h)) / (2 * h))


def fd_laplacian(f, x, y, h=1e-4):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h)
            - 4.0 * f(x, y)) / h ** 2


def l2_orders(errors, ratio=2.0):
    return [math.log(errors[i] / errors[i + 1]) / math.log(ratio)
            for i in range(len(errors) - 1)]
