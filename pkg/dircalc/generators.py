"""Generators for the standard families of Dirichlet spaces.

Grid families are calibrated with mu(x) = h^d, w(x,y) = h^(d-2) and edge length h, so that the
generator approximates minus the Euclidean Laplacian.
"""

import numpy as np

from dircalc.space import DirichletSpace
from dircalc.exceptions import ValidationError


def _grid_edges(d, n, periodic):
    # Undirected nearest-neighbour pairs of an n^d grid, C ordering
    shape = (n,)*d
    index = np.arange(n**d).reshape(shape)
    pairs = []
    for axis in range(d):
        if periodic:
            nb = np.roll(index, -1, axis=axis)
            pairs.append(np.stack([index.flatten(), nb.flatten()], axis=1))
        else:
            sl_lo = [slice(None)]*d
            sl_hi = [slice(None)]*d
            sl_lo[axis] = slice(0, n-1)
            sl_hi[axis] = slice(1, n)
            pairs.append(np.stack([index[tuple(sl_lo)].flatten(), index[tuple(sl_hi)].flatten()], axis=1))
    return np.concatenate(pairs, axis=0)


def _calibrated(pairs, d, h):
    # Edge table with grid calibration
    m = len(pairs)
    return np.column_stack([pairs, np.full(m, h**(d-2)), np.full(m, h)])


def _check_int(params, name, minimum):
    value = params.get(name)
    if value is None or int(value) != value or value < minimum:
        raise ValidationError("Parameter '{0}' must be an integer >= {1}; got {2}.".format(name, minimum, value))
    return int(value)


def _check_h(params, default):
    h = float(params.get("h", default))
    if not h > 0.0:
        raise ValidationError("Parameter 'h' must be positive; got {0}.".format(h))
    return h


def torus_grid(**params):
    """Periodic n^d grid. For n = 2 the two neighbours coincide and the edge carries conductance 2w.

    Parameters
    ----------
    d : int
        Dimension, at least 1.

    n : int
        Points per side, at least 2.

    h : float, optional
        Spacing. Defaults to 1/n.
    """
    d = _check_int(params, "d", 1)
    n = _check_int(params, "n", 2)
    h = _check_h(params, 1.0/n)
    edges = _calibrated(_grid_edges(d, n, True), d, h)
    return DirichletSpace(mu=np.full(n**d, h**d), edges=edges, h=h, kind="torus_grid",
                          params={"d" : d, "n" : n, "h" : h}, verbose=params.get("verbose", False))


def box_grid(**params):
    """Free-boundary n^d grid (Neumann type; the boundary keeps the interior calibration).

    Parameters
    ----------
    d : int
        Dimension, at least 1.

    n : int
        Points per side, at least 2.

    h : float, optional
        Spacing. Defaults to 1/n.
    """
    d = _check_int(params, "d", 1)
    n = _check_int(params, "n", 2)
    h = _check_h(params, 1.0/n)
    edges = _calibrated(_grid_edges(d, n, False), d, h)
    return DirichletSpace(mu=np.full(n**d, h**d), edges=edges, h=h, kind="box_grid",
                          params={"d" : d, "n" : n, "h" : h}, verbose=params.get("verbose", False))


def path(**params):
    """Path graph with n vertices, the one-dimensional box grid.

    Parameters
    ----------
    n : int
        Number of vertices, at least 2.

    h : float, optional
        Spacing. Defaults to 1.
    """
    n = _check_int(params, "n", 2)
    h = _check_h(params, 1.0)
    edges = _calibrated(_grid_edges(1, n, False), 1, h)
    return DirichletSpace(mu=np.full(n, h), edges=edges, h=h, kind="path",
                          params={"n" : n, "h" : h}, verbose=params.get("verbose", False))


def dumbbell(**params):
    """Two n^d box grids joined through a path of `neck` extra vertices.

    The neck runs from the centre of the last face of the first block (along axis 0) to the
    centre of the first face of the second block. Vertices 0..n^d-1 form the first block,
    n^d..2n^d-1 the second, and the neck vertices follow.

    Parameters
    ----------
    d : int
        Dimension of each block, at least 1.

    n : int
        Points per side of each block, at least 2.

    neck : int, optional
        Number of neck vertices. Defaults to 2.

    h : float, optional
        Spacing. Defaults to 1/n.
    """
    d = _check_int(params, "d", 1)
    n = _check_int(params, "n", 2)
    neck = _check_int(dict(params, neck=params.get("neck", 2)), "neck", 0)
    h = _check_h(params, 1.0/n)

    block = _grid_edges(d, n, False)
    size = n**d
    c = n//2
    exit_vertex = int(np.ravel_multi_index((n-1,)+(c,)*(d-1), (n,)*d))
    entry_vertex = size+int(np.ravel_multi_index((0,)+(c,)*(d-1), (n,)*d))

    chain = [exit_vertex]+[2*size+k for k in range(neck)]+[entry_vertex]
    neck_pairs = np.array([[chain[k], chain[k+1]] for k in range(len(chain)-1)])
    pairs = np.concatenate([block, block+size, neck_pairs], axis=0)

    return DirichletSpace(mu=np.full(2*size+neck, h**d), edges=_calibrated(pairs, d, h), h=h, kind="dumbbell",
                          params={"d" : d, "n" : n, "neck" : neck, "h" : h}, verbose=params.get("verbose", False))


def binary_tree(**params):
    """Complete binary tree of the given depth (2^(depth+1)-1 vertices) with unit measure and
    conductance.

    Parameters
    ----------
    depth : int
        Depth, at least 1.

    h : float, optional
        Edge length. Defaults to 1.
    """
    depth = _check_int(params, "depth", 1)
    h = _check_h(params, 1.0)
    N = 2**(depth+1)-1
    children = np.arange(1, N)
    pairs = np.stack([(children-1)//2, children], axis=1)
    m = len(pairs)
    edges = np.column_stack([pairs, np.ones(m), np.full(m, h)])
    return DirichletSpace(mu=np.ones(N), edges=edges, h=h, kind="binary_tree",
                          params={"depth" : depth, "h" : h}, verbose=params.get("verbose", False))


def sierpinski(**params):
    """Level-m Sierpinski gasket graph with 3(3^m+1)/2 vertices.

    Each of the 3^m cells carries mass 3^-m, split evenly between its corners; edges have length
    2^-m and conductance (5/3)^m.

    Parameters
    ----------
    level : int
        Refinement level, at least 0.
    """
    level = _check_int(dict(params, level=params.get("level")), "level", 0)
    side = 2**level

    # Subdivide integer triangles down to unit side
    cells = [((0, 0), (side, 0), (0, side))]
    for _ in range(level):
        refined = []
        for a, b, c in cells:
            ab = ((a[0]+b[0])//2, (a[1]+b[1])//2)
            bc = ((b[0]+c[0])//2, (b[1]+c[1])//2)
            ca = ((c[0]+a[0])//2, (c[1]+a[1])//2)
            refined += [(a, ab, ca), (ab, b, bc), (ca, bc, c)]
        cells = refined

    # Number vertices in sorted coordinate order
    points = sorted(set(p for cell in cells for p in cell))
    index = {p : i for i, p in enumerate(points)}
    mu = np.zeros(len(points))
    pairs = []
    for a, b, c in cells:
        for p in (a, b, c):
            mu[index[p]] += 3.0**(-level)/3.0
        pairs += [[index[a], index[b]], [index[b], index[c]], [index[c], index[a]]]

    h = 2.0**(-level)
    m = len(pairs)
    edges = np.column_stack([np.array(pairs), np.full(m, (5.0/3.0)**level), np.full(m, h)])
    return DirichletSpace(mu=mu, edges=edges, h=h, kind="sierpinski",
                          params={"level" : level}, verbose=params.get("verbose", False))


GENERATORS = {"torus_grid" : torus_grid,
              "box_grid" : box_grid,
              "path" : path,
              "dumbbell" : dumbbell,
              "binary_tree" : binary_tree,
              "sierpinski" : sierpinski}


def generate(kind, params=None, **kwargs):
    """Builds a space of the given kind.

    Parameters
    ----------
    kind : str
        One of "torus_grid", "box_grid", "path", "dumbbell", "binary_tree" or "sierpinski".

    params : dict, optional
        Generator parameters. Keyword arguments are merged on top.

    Returns
    -------
    DirichletSpace
    """
    if kind not in GENERATORS:
        raise ValidationError("{0} is not a valid space kind. Valid kinds are {1}.".format(kind, ", ".join(sorted(GENERATORS))))
    merged = dict(params or {})
    merged.update(kwargs)
    return GENERATORS[kind](**merged)


def grid_coordinates(space):
    """Returns lattice coordinates of a grid-family space as an array of shape (N, d).

    Dumbbell coordinates place the second block n spacings beyond the first along axis 0 and put
    neck vertices on the axis between them.
    """
    kind = space.kind
    p = space.params
    if kind == "path":
        return (np.arange(p["n"])*p["h"])[:,np.newaxis]
    if kind in ("torus_grid", "box_grid"):
        d, n = p["d"], p["n"]
        return np.stack(np.unravel_index(np.arange(n**d), (n,)*d), axis=1)*p["h"]
    if kind == "dumbbell":
        d, n, neck, h = p["d"], p["n"], p["neck"], p["h"]
        block = np.stack(np.unravel_index(np.arange(n**d), (n,)*d), axis=1).astype(float)
        second = np.copy(block)
        second[:,0] += n+neck
        necks = np.zeros((neck, d))+n//2
        necks[:,0] = n+np.arange(neck)
        return np.concatenate([block, second, necks], axis=0)*h
    raise ValidationError("{0} spaces have no lattice coordinates.".format(kind))
