use crate::radio::{ActiveSet, Station};
use crate::scenario::Dims;

/// Association (`zeta`, `eps`) and drone-usage (`kappa`) variables, relaxed to
/// `[0, 1]` or binary.
///
/// Layout: `zeta[n][u][d][m]`, `eps[n][u][l][m]`, `kappa[n][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVars {
    dims: Dims,
    zeta: Vec<f64>,
    eps: Vec<f64>,
    kappa: Vec<f64>,
    pub binary: bool,
}

const ON: f64 = 0.5;

impl DecisionVars {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            zeta: vec![0.0; dims.blocks * dims.users * dims.dbs * dims.subchannels],
            eps: vec![0.0; dims.blocks * dims.users * dims.gbs * dims.subchannels],
            kappa: vec![0.0; dims.blocks * dims.dbs],
            binary: false,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    fn zi(&self, n: usize, u: usize, d: usize, m: usize) -> usize {
        ((n * self.dims.users + u) * self.dims.dbs + d) * self.dims.subchannels + m
    }

    fn ei(&self, n: usize, u: usize, l: usize, m: usize) -> usize {
        ((n * self.dims.users + u) * self.dims.gbs + l) * self.dims.subchannels + m
    }

    pub fn zeta(&self, n: usize, u: usize, d: usize, m: usize) -> f64 {
        self.zeta[self.zi(n, u, d, m)]
    }

    pub fn eps(&self, n: usize, u: usize, l: usize, m: usize) -> f64 {
        self.eps[self.ei(n, u, l, m)]
    }

    pub fn kappa(&self, n: usize, d: usize) -> f64 {
        self.kappa[n * self.dims.dbs + d]
    }

    pub fn set_zeta(&mut self, n: usize, u: usize, d: usize, m: usize, v: f64) {
        let i = self.zi(n, u, d, m);
        self.zeta[i] = v;
    }

    pub fn set_eps(&mut self, n: usize, u: usize, l: usize, m: usize, v: f64) {
        let i = self.ei(n, u, l, m);
        self.eps[i] = v;
    }

    pub fn set_kappa(&mut self, n: usize, d: usize, v: f64) {
        self.kappa[n * self.dims.dbs + d] = v;
    }

    /// Association mass of user `u` on `(station, m)`.
    pub fn mass(&self, n: usize, u: usize, station: Station, m: usize) -> f64 {
        match station {
            Station::Ground(l) => self.eps(n, u, l, m),
            Station::Drone(d) => self.zeta(n, u, d, m),
        }
    }

    pub fn set_mass(&mut self, n: usize, u: usize, station: Station, m: usize, v: f64) {
        match station {
            Station::Ground(l) => self.set_eps(n, u, l, m, v),
            Station::Drone(d) => self.set_zeta(n, u, d, m, v),
        }
    }

    /// All (station, sub-channel) pairs in canonical order: ground stations
    /// first, then drones, each by index, then by sub-channel.
    pub fn pairs(&self) -> Vec<(Station, usize)> {
        station_pairs(self.dims)
    }

    /// Binary association of user `u` in block `n`: the first pair holding
    /// mass above one half.
    pub fn assignment(&self, n: usize, u: usize) -> Option<(Station, usize)> {
        self.pairs().into_iter().find(|&(s, m)| self.mass(n, u, s, m) > ON)
    }

    /// Clears user `u` in block `n` and assigns it to `(station, m)`.
    pub fn assign(&mut self, n: usize, u: usize, station: Station, m: usize) {
        for (s, mm) in self.pairs() {
            self.set_mass(n, u, s, mm, 0.0);
        }
        self.set_mass(n, u, station, m, 1.0);
    }

    /// `sum_{u,m} zeta[n][u][d][m]`.
    pub fn drone_load(&self, n: usize, d: usize) -> f64 {
        let mut total = 0.0;
        for u in 0..self.dims.users {
            for m in 0..self.dims.subchannels {
                total += self.zeta(n, u, d, m);
            }
        }
        total
    }

    /// `sum_u eps[n][u][l][m]`.
    pub fn gbs_load_on(&self, n: usize, l: usize, m: usize) -> f64 {
        (0..self.dims.users).map(|u| self.eps(n, u, l, m)).sum()
    }

    pub fn gbs_load(&self, n: usize, l: usize) -> f64 {
        (0..self.dims.subchannels).map(|m| self.gbs_load_on(n, l, m)).sum()
    }

    /// Sets every `kappa[n][d]` to 1 when the drone serves anyone, else 0.
    pub fn derive_kappa(&mut self) {
        for n in 0..self.dims.blocks {
            for d in 0..self.dims.dbs {
                let used = self.drone_load(n, d) > ON;
                self.set_kappa(n, d, if used { 1.0 } else { 0.0 });
            }
        }
    }

    /// Stations transmitting on each sub-channel, read from binary values.
    pub fn active_set(&self) -> ActiveSet {
        let mut a = ActiveSet::silent(self.dims);
        for n in 0..self.dims.blocks {
            for u in 0..self.dims.users {
                for (s, m) in self.pairs() {
                    if self.mass(n, u, s, m) > ON {
                        a.set_station(n, s, m, true);
                    }
                }
            }
        }
        a
    }

    pub fn active_drone_count(&self, n: usize) -> usize {
        (0..self.dims.dbs).filter(|&d| self.kappa(n, d) > ON).count()
    }

    /// True if every entry is within `tol` of 0 or 1.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.zeta
            .iter()
            .chain(&self.eps)
            .chain(&self.kappa)
            .all(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol)
    }

    /// Copies block `n` of `other` into `self`.
    pub fn copy_block(&mut self, other: &DecisionVars, n: usize) {
        for u in 0..self.dims.users {
            for (s, m) in self.pairs() {
                self.set_mass(n, u, s, m, other.mass(n, u, s, m));
            }
        }
        for d in 0..self.dims.dbs {
            self.set_kappa(n, d, other.kappa(n, d));
        }
    }
}

pub fn station_pairs(dims: Dims) -> Vec<(Station, usize)> {
    let mut out = Vec::with_capacity((dims.gbs + dims.dbs) * dims.subchannels);
    for l in 0..dims.gbs {
        for m in 0..dims.subchannels {
            out.push((Station::Ground(l), m));
        }
    }
    for d in 0..dims.dbs {
        for m in 0..dims.subchannels {
            out.push((Station::Drone(d), m));
        }
    }
    out
}
