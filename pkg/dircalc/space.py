import time
import json
import hashlib
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from dircalc.exceptions import ValidationError
from dircalc.dc_math import fit_grouped_line, geometric_nodes


SPACE_FILE_VERSION = 1


class DirichletSpace:
    """A finite Dirichlet space: a connected weighted graph with a vertex measure, symmetric
    conductances and edge lengths. Fields on the space are numpy arrays indexed by vertex.

    The space may be read from a space file or given directly as arrays.

    Parameters
    ----------
    space_file : str, optional
        Path to a JSON space file. If given, the array kwargs below are ignored.

    mu : array_like, optional
        Vertex measure, strictly positive. Required if space_file is not given.

    edges : array_like, optional
        Array of shape (m, 4) with rows (u, v, w, len): endpoints, conductance and length of each
        undirected edge. Repeated pairs are merged by adding conductances and keeping the shorter
        length. Edges with zero conductance are dropped. Required if space_file is not given.

    h : float, optional
        Nominal mesh scale. Defaults to the smallest edge length.

    kind : str, optional
        Name of the generator which produced the space. Defaults to "custom".

    params : dict, optional
        Generator parameters, stored for traceability. Defaults to {}.

    verbose : bool, optional
        Defaults to False.
    """

    def __init__(self, **kwargs):

        # Load kwargs
        self._verbose = kwargs.get("verbose", False)
        space_file = kwargs.get("space_file", None)

        if self._verbose:
            start_time = time.time()
            print("\nBuilding Dirichlet space...", end='', flush=True)

        if space_file is not None:
            self._load_space(space_file)
        else:
            if "mu" not in kwargs or "edges" not in kwargs:
                raise ValidationError("Either 'space_file' or both 'mu' and 'edges' must be given.")
            self._set_data(mu=kwargs["mu"],
                           edges=kwargs["edges"],
                           h=kwargs.get("h", None),
                           kind=kwargs.get("kind", "custom"),
                           params=kwargs.get("params", {}))

        if self._verbose:
            end_time = time.time()
            print("Finished. Time: {0} s.".format(end_time-start_time), flush=True)
            print("\nSpace Parameters:")
            print("    kind: {0}".format(self.kind))
            print("    # vertices: {0}".format(self.N))
            print("    # edges: {0}".format(self.N_edges))
            print("    mesh h: {0}".format(self.h))
            print("    total measure: {0}".format(self.total_measure))


    def _load_space(self, space_file):
        # Reads and validates a JSON space file

        if ".json" not in space_file:
            raise ValidationError("{0} is not a JSON space file.".format(space_file))
        try:
            with open(space_file, 'r') as input_handle:
                data = json.load(input_handle)
        except OSError as e:
            raise ValidationError("Could not read {0}: {1}".format(space_file, e))
        except json.JSONDecodeError as e:
            raise ValidationError("Could not parse {0}: {1}".format(space_file, e))

        # Check format
        for key in ["version", "kind", "params", "h", "vertices", "edges"]:
            if key not in data:
                raise ValidationError("Key '{0}' is missing from {1}.".format(key, space_file))
        if data["version"] != SPACE_FILE_VERSION:
            raise ValidationError("Space file version {0} is not supported.".format(data["version"]))

        # Vertices must be dense 0-based ids
        ids = [v["id"] for v in data["vertices"]]
        if sorted(ids) != list(range(len(ids))):
            raise ValidationError("Vertex ids in {0} must be dense 0-based integers.".format(space_file))
        mu = np.zeros(len(ids))
        for v in data["vertices"]:
            mu[v["id"]] = v["mu"]

        # An edge may be listed once or in both orientations with matching data
        listed = {}
        for e in data["edges"]:
            u, v = int(e["u"]), int(e["v"])
            key = (min(u, v), max(u, v))
            entry = (float(e["w"]), float(e["len"]))
            if key in listed:
                if (u, v) in listed[key][1] or listed[key][0] != entry:
                    raise ValidationError("Edge ({0}, {1}) is repeated or not symmetric in {2}.".format(u, v, space_file))
                listed[key][1].append((u, v))
            else:
                listed[key] = (entry, [(u, v)])
        edges = [[k[0], k[1], val[0][0], val[0][1]] for k, val in listed.items()]

        self._set_data(mu=mu, edges=np.array(edges).reshape((-1, 4)), h=data["h"], kind=data["kind"], params=data["params"])


    def _set_data(self, mu, edges, h, kind, params):
        # Stores and validates vertex and edge data

        self.mu = np.array(mu, dtype=float).flatten()
        self.N = len(self.mu)
        self.kind = kind
        self.params = dict(params)

        if self.N == 0:
            raise ValidationError("A space needs at least one vertex.")
        if not np.all(np.isfinite(self.mu)) or np.any(self.mu <= 0.0):
            raise ValidationError("The vertex measure must be finite and strictly positive.")

        edges = np.array(edges, dtype=float).reshape((-1, 4))
        u = edges[:,0].astype(int)
        v = edges[:,1].astype(int)
        w = edges[:,2]
        length = edges[:,3]

        # Check edges
        if np.any(u < 0) or np.any(v < 0) or np.any(u >= self.N) or np.any(v >= self.N):
            raise ValidationError("Edge endpoints must be vertex ids in [0, {0}).".format(self.N))
        if np.any(u == v):
            raise ValidationError("Self loops are not allowed (w(x,x) must vanish).")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ValidationError("Conductances must be finite and nonnegative.")
        keep = w > 0.0
        u, v, w, length = u[keep], v[keep], w[keep], length[keep]
        if not np.all(np.isfinite(length)) or np.any(length <= 0.0):
            raise ValidationError("Edge lengths must be finite and strictly positive.")

        # Merge repeated pairs
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        if len(lo) > 0:
            pairs, inverse = np.unique(np.stack([lo, hi], axis=1), axis=0, return_inverse=True)
            inverse = inverse.flatten()
        else:
            pairs, inverse = np.zeros((0, 2), dtype=int), np.zeros(0, dtype=int)
        self._u = pairs[:,0].astype(int)
        self._v = pairs[:,1].astype(int)
        self._w = np.zeros(len(pairs))
        np.add.at(self._w, inverse, w)
        self._len = np.full(len(pairs), np.inf)
        np.minimum.at(self._len, inverse, length)
        self.N_edges = len(pairs)

        # Mesh scale
        if h is None:
            h = float(np.min(self._len)) if self.N_edges > 0 else 1.0
        if not h > 0.0:
            raise ValidationError("The mesh scale h must be positive.")
        self.h = float(h)

        self.total_measure = float(np.sum(self.mu))

        # Connectivity
        n_comp, _ = csgraph.connected_components(self._adjacency(self._w), directed=False)
        if n_comp != 1:
            raise ValidationError("The graph has {0} connected components; a Dirichlet space must be connected.".format(n_comp))

        self._distances = None
        self._hash = None


    def _adjacency(self, values):
        # Symmetric sparse matrix with the given per-edge values
        return sp.coo_matrix((np.concatenate([values, values]),
                              (np.concatenate([self._u, self._v]), np.concatenate([self._v, self._u]))),
                             shape=(self.N, self.N)).tocsr()


    @property
    def edges(self):
        """Edge table of shape (m, 4) with rows (u, v, w, len), u < v."""
        return np.stack([self._u, self._v, self._w, self._len], axis=1)


    @property
    def incidence(self):
        """Sparse signed incidence matrix of shape (m, n): row e holds +1 at u and -1 at v."""
        if not hasattr(self, "_incidence"):
            rows = np.concatenate([np.arange(self.N_edges), np.arange(self.N_edges)])
            cols = np.concatenate([self._u, self._v])
            vals = np.concatenate([np.ones(self.N_edges), -np.ones(self.N_edges)])
            self._incidence = sp.csr_matrix((vals, (rows, cols)), shape=(self.N_edges, self.N))
        return self._incidence


    @property
    def conductance(self):
        """Dense symmetric conductance matrix w(x,y)."""
        return self._adjacency(self._w).toarray()


    @property
    def stiffness(self):
        """Dense matrix K = diag(sum_y w(x,y)) - w, so that L = diag(mu)^{-1} K."""
        W = self.conductance
        return np.diag(np.sum(W, axis=1))-W


    def generator(self):
        """Returns the dense matrix of the generator (Lf)(x) = mu(x)^{-1} sum_y w(x,y)(f(x)-f(y)).

        Returns
        -------
        ndarray
            Matrix of shape (N, N).
        """
        return self.stiffness/self.mu[:,np.newaxis]


    def apply_generator(self, f):
        """Applies the generator to a field (or to each column of a stack of fields)."""
        f = np.asarray(f)
        B = self.incidence
        flux = self._w.reshape((-1,)+(1,)*(f.ndim-1))*B.dot(f)
        mu = self.mu.reshape((-1,)+(1,)*(f.ndim-1))
        return B.T.dot(flux)/mu


    def energy(self, f, g):
        """Calculates the energy E(f,g) = 1/2 sum_{x,y} w(x,y)(f(x)-f(y))(g(x)-g(y)).

        Parameters
        ----------
        f, g : ndarray
            Fields on the space.

        Returns
        -------
        float
        """
        self._check_field(f)
        self._check_field(g)
        B = self.incidence
        return float(np.sum(self._w*B.dot(f)*B.dot(g)))


    def carre_du_champ(self, f, g):
        """Calculates Gamma(f,g)(x) = (2 mu(x))^{-1} sum_y w(x,y)(f(x)-f(y))(g(x)-g(y)).

        Parameters
        ----------
        f, g : ndarray
            Fields of shape (N,) or stacks of fields of shape (N, k).

        Returns
        -------
        ndarray
            Field (or stack of fields) of the same shape as f.
        """
        f = np.asarray(f)
        g = np.asarray(g)
        B = self.incidence
        df = B.dot(f)
        dg = B.dot(g)
        shape = (-1,)+(1,)*(df.ndim-1)
        edge_terms = self._w.reshape(shape)*df*dg
        return abs(B).T.dot(edge_terms)/(2.0*self.mu.reshape(shape))


    def gradient_norm(self, f):
        """Returns |grad f| = sqrt(Gamma(f,f))."""
        return np.sqrt(np.maximum(np.real(self.carre_du_champ(f, np.conj(f))), 0.0))


    def leibniz_defect(self, f, g, h):
        """Calculates max_x |Gamma(fg,h) - f Gamma(g,h) - g Gamma(f,h)|(x).

        The defect vanishes for strongly local forms. On a graph it equals
        (2 mu(x))^{-1} |sum_y w(x,y) df dg dh| and is O(h) for smooth data on grids.
        """
        f = np.asarray(f)
        g = np.asarray(g)
        h = np.asarray(h)
        defect = self.carre_du_champ(f*g, h)-f*self.carre_du_champ(g, h)-g*self.carre_du_champ(f, h)
        return float(np.max(np.abs(defect)))


    @property
    def distances(self):
        """Dense matrix of shortest-path distances with edge lengths."""
        if self._distances is None:
            if self._verbose:
                start_time = time.time()
                print("\nComputing shortest-path distances...", end='', flush=True)
            self._distances = csgraph.dijkstra(self._adjacency(self._len), directed=False)
            if self._verbose:
                end_time = time.time()
                print("Finished. Time: {0} s.".format(end_time-start_time), flush=True)
        return self._distances


    @property
    def diameter(self):
        """Largest distance between two vertices."""
        return float(np.max(self.distances))


    def distance(self, x, y):
        """Shortest-path distance between vertices x and y."""
        return float(self.distances[x,y])


    def ball_mask(self, r):
        """Boolean matrix whose row x marks the members of B(x, r)."""
        return self.distances <= r*(1.0+1e-12)+1e-300


    def ball(self, x, r):
        """Returns the closed ball of radius r around vertex x."""
        return Ball(space=self, center=x, radius=r)


    def volume(self, x, r):
        """Returns V(x,r), the measure of the ball of radius r around x."""
        return self.ball(x, r).volume


    def volumes(self, r):
        """Returns V(x,r) for every vertex x."""
        return self.ball_mask(r).dot(self.mu)


    def ball_pairs(self, r, center=0):
        """Pairs (B(center, r), B(y, r)), keeping one pair per distinct set distance.

        Parameters
        ----------
        r : float
            Common radius.

        center : int, optional
            Center of the first ball. Defaults to 0.

        Returns
        -------
        list
            Tuples (members_1, members_2, set_distance) sorted by set distance.
        """
        mask = self.ball_mask(r)
        first = np.flatnonzero(mask[center])
        gaps = np.min(self.distances[first], axis=0)

        pairs = []
        seen = set()
        for y in np.argsort(self.distances[center], kind='stable'):
            second = np.flatnonzero(mask[y])
            gap = float(np.min(gaps[second]))
            key = round(gap/self.h, 6)
            if key not in seen:
                seen.add(key)
                pairs.append((first, second, gap))
        return sorted(pairs, key=lambda pair: pair[2])


    def default_radii(self, points_per_decade=8):
        """Geometric radii in [4h, diam/4], widened to [h, diam] on spaces too small for that window."""
        lo, hi = 4.0*self.h, self.diameter/4.0
        if hi <= lo:
            lo, hi = self.h, self.diameter
        if hi <= lo:
            return np.array([max(self.diameter, self.h)])
        return geometric_nodes(lo, hi, points_per_decade)


    def doubling_fit(self, radii):
        """Fits the volume doubling constant and the homogeneous dimension.

        Parameters
        ----------
        radii : array_like
            Radii probed. Radii outside (0, diameter] are dropped with a warning.

        Returns
        -------
        dict
            "constant" is sup V(x,2r)/V(x,r); "nu" the least-squares exponent of V(x,r) in r
            (common to all centers, nonnegative); "nu_constant" the smallest C with
            V(x,r)/V(x,s) <= C (r/s)^nu over the probed radii; "r2" and "max_residual" describe
            the fit.
        """
        radii = np.array(radii, dtype=float).flatten()
        if len(radii) == 0:
            raise ValidationError("doubling_fit needs at least one radius.")

        # A single vertex has no scales
        if self.diameter == 0.0:
            return {"constant" : 1.0, "nu" : 0.0, "nu_constant" : 1.0, "r2" : 0.0, "max_residual" : 0.0, "radii" : radii.tolist()}

        inside = (radii > 0.0) & (radii <= self.diameter*(1.0+1e-12))
        if not np.all(inside):
            warnings.warn("{0} radii outside (0, diameter] were ignored.".format(np.sum(~inside)))
        radii = np.sort(radii[inside])
        if len(radii) == 0:
            raise ValidationError("No radius lies in (0, {0}].".format(self.diameter))

        V = np.array([self.volumes(r) for r in radii])
        V2 = np.array([self.volumes(2.0*r) for r in radii])
        constant = float(np.max(V2/V))

        # Pooled slope of log V against log r, one intercept per center
        log_r = np.repeat(np.log(radii)[:,np.newaxis], self.N, axis=1)
        groups = np.repeat(np.arange(self.N)[np.newaxis,:], len(radii), axis=0)
        fit = fit_grouped_line(log_r.flatten(), np.log(V).flatten(), groups.flatten())
        nu = max(fit["slope"], 0.0)

        # Constant for the exponent form
        ratio = V[:,np.newaxis,:]/V[np.newaxis,:,:]/((radii[:,np.newaxis]/radii[np.newaxis,:])**nu)[:,:,np.newaxis]
        upper = radii[:,np.newaxis] >= radii[np.newaxis,:]
        nu_constant = float(np.max(ratio[upper]))

        return {"constant" : constant,
                "nu" : float(nu),
                "nu_constant" : nu_constant,
                "r2" : fit["r2"],
                "max_residual" : fit["max_residual"],
                "radii" : radii.tolist()}


    def to_dict(self):
        """Returns the space in the JSON space-file layout."""
        return {"version" : SPACE_FILE_VERSION,
                "kind" : self.kind,
                "params" : self.params,
                "h" : self.h,
                "vertices" : [{"id" : i, "mu" : float(m)} for i, m in enumerate(self.mu)],
                "edges" : [{"u" : int(u), "v" : int(v), "w" : float(w), "len" : float(l)}
                           for u, v, w, l in zip(self._u, self._v, self._w, self._len)]}


    def export_json(self, filename):
        """Writes the space to a JSON space file.

        Parameters
        ----------
        filename : str
            Must have '.json' extension.
        """
        if ".json" not in filename:
            raise ValidationError("Filename for space export must contain .json extension.")
        with open(filename, 'w') as export_handle:
            json.dump(self.to_dict(), export_handle, sort_keys=True, indent=2)
            print(file=export_handle)

        if self._verbose:
            print()
            print("Space successfully written to '{0}'.".format(filename))


    @property
    def hash(self):
        """SHA-256 of the canonical serialization of the space."""
        if self._hash is None:
            canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
            self._hash = hashlib.sha256(canonical.encode('utf-8')).hexdigest()
        return self._hash


    def _check_field(self, f):
        if np.shape(f)[0] != self.N:
            raise ValidationError("Field has {0} values; the space has {1} vertices.".format(np.shape(f)[0], self.N))


class Ball:
    """A closed metric ball {y : d(center, y) <= radius}.

    Parameters
    ----------
    space : DirichletSpace
        Space the ball lives in.

    center : int
        Center vertex.

    radius : float
        Nonnegative radius.
    """

    def __init__(self, **kwargs):

        self._space = kwargs["space"]
        self.center = int(kwargs["center"])
        self.radius = float(kwargs["radius"])
        if self.radius < 0.0:
            raise ValidationError("Ball radius must be nonnegative.")
        if self.center < 0 or self.center >= self._space.N:
            raise ValidationError("Ball center {0} is not a vertex.".format(self.center))

        d = self._space.distances[self.center]
        self.members = np.flatnonzero(d <= self.radius*(1.0+1e-12)+1e-300)
        self.volume = float(np.sum(self._space.mu[self.members]))


    def average(self, f):
        """mu-weighted average of f over the ball."""
        f = np.asarray(f)
        return np.sum(self._space.mu[self.members]*f[self.members])/self.volume


    def __contains__(self, x):
        return x in set(self.members.tolist())
