//! Problem instances, the augmented network with station copies, and the
//! feasible sortie set.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charging::ChargingModel;
use crate::heuristics::mcws_initial;

/// Index of a node in an [`AugmentedNetwork`].
pub type NodeId = usize;

/// Half-width of the square in which generated nodes are placed, in km.
pub const COORD_LIMIT_KM: f64 = 20.0;
/// Drone payload capacity in kg; generated parcel weights lie in (0, this].
pub const PAYLOAD_KG: f64 = 6.0;
const MAX_REGENERATIONS: usize = 1000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no EV-feasible instance found after {0} regenerations")]
    InfeasibleConfiguration(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn manhattan(&self, other: &Point) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn euclidean(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub service_time_s: f64,
    #[serde(default)]
    pub weight_kg: f64,
    #[serde(default = "default_true")]
    pub drone_eligible: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// Piecewise-linear map from parcel weight (kg) to drone flight budget (s).
/// Values outside the tabulated weights are clamped to the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RangeTable {
    points: Vec<[f64; 2]>,
}

impl RangeTable {
    pub fn new(mut points: Vec<[f64; 2]>) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::InvalidParameters(
                "weight range table is empty".into(),
            ));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite() || p[1] < 0.0) {
            return Err(ModelError::InvalidParameters(
                "weight range table has non-finite or negative entries".into(),
            ));
        }
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        Ok(RangeTable { points })
    }

    /// Constant budget regardless of weight.
    pub fn constant(budget_s: f64) -> Self {
        RangeTable { points: vec![[0.0, budget_s]] }
    }

    /// Default table used by the Range variant: full budget with an empty
    /// drone, 60% of it at full payload.
    pub fn default_for(qd_s: f64) -> Self {
        RangeTable { points: vec![[0.0, qd_s], [PAYLOAD_KG, 0.6 * qd_s]] }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn budget(&self, weight_kg: f64) -> f64 {
        let pts = &self.points;
        if weight_kg <= pts[0][0] {
            return pts[0][1];
        }
        let last = pts[pts.len() - 1];
        if weight_kg >= last[0] {
            return last[1];
        }
        let idx = pts.partition_point(|p| p[0] <= weight_kg);
        let (a, b) = (pts[idx - 1], pts[idx]);
        if b[0] - a[0] <= 0.0 {
            return b[1];
        }
        a[1] + (b[1] - a[1]) * (weight_kg - a[0]) / (b[0] - a[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub ev_speed_kmh: f64,
    pub drone_speed_kmh: f64,
    /// EV battery capacity in seconds of driving.
    pub qt_s: f64,
    /// Drone battery capacity in seconds of flight.
    pub qd_s: f64,
    /// Ratio of drone to EV energy consumption per second.
    pub gamma: f64,
    pub launch_s: f64,
    pub retrieve_s: f64,
    #[serde(default)]
    pub max_leg: Option<usize>,
    #[serde(default = "default_copies")]
    pub m_copies: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_range: Option<RangeTable>,
}

fn default_copies() -> usize {
    2
}

impl Default for Params {
    fn default() -> Self {
        Params {
            ev_speed_kmh: 40.0,
            drone_speed_kmh: 60.0,
            qt_s: 9000.0,
            qd_s: 1200.0,
            gamma: 0.4,
            launch_s: 100.0,
            retrieve_s: 20.0,
            max_leg: None,
            m_copies: 2,
            weight_range: None,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("ev_speed_kmh", self.ev_speed_kmh),
            ("drone_speed_kmh", self.drone_speed_kmh),
            ("qt_s", self.qt_s),
            ("qd_s", self.qd_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameters(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ModelError::InvalidParameters(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        for (name, v) in [("launch_s", self.launch_s), ("retrieve_s", self.retrieve_s)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParameters(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.m_copies == 0 {
            return Err(ModelError::InvalidParameters("m_copies must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub depot: Point,
    pub customers: Vec<Customer>,
    pub stations: Vec<Station>,
    pub params: Params,
}

impl Instance {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        let coords = std::iter::once((self.depot.x, self.depot.y))
            .chain(self.customers.iter().map(|c| (c.x, c.y)))
            .chain(self.stations.iter().map(|s| (s.x, s.y)));
        for (x, y) in coords {
            if !x.is_finite() || !y.is_finite() {
                return Err(ModelError::InvalidParameters("non-finite coordinate".into()));
            }
        }
        let mut ids: Vec<u32> = self.customers.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::InvalidParameters("duplicate customer id".into()));
        }
        for c in &self.customers {
            if !(c.service_time_s.is_finite() && c.service_time_s >= 0.0) {
                return Err(ModelError::InvalidParameters(format!(
                    "customer {} has invalid service time",
                    c.id
                )));
            }
        }
        Ok(())
    }

    /// Drone flight budget for a customer: the weight table when present,
    /// otherwise Q^D.
    pub fn drone_budget(&self, customer: &Customer) -> f64 {
        match &self.params.weight_range {
            Some(table) => table.budget(customer.weight_kg),
            None => self.params.qd_s,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Generates a random instance: depot at the origin, customers and stations
/// uniform in [-20, 20] km, parcel weights uniform in (0, 6] kg. Coordinates
/// are redrawn until the construction heuristic finds an EV-only tour.
pub fn generate_instance(
    seed: u64,
    n_customers: usize,
    n_stations: usize,
    params: &Params,
) -> Result<Instance, ModelError> {
    params.validate()?;
    if n_customers == 0 {
        return Err(ModelError::InvalidParameters("at least one customer is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe_model = ChargingModel::linear(crate::charging::DEFAULT_FULL_CHARGE_S);
    for _ in 0..MAX_REGENERATIONS {
        let mut coord = || rng.gen_range(-COORD_LIMIT_KM..=COORD_LIMIT_KM);
        let mut customers = Vec::with_capacity(n_customers);
        for idx in 0..n_customers {
            let (x, y) = (coord(), coord());
            customers.push(Customer {
                id: idx as u32 + 1,
                x,
                y,
                service_time_s: 0.0,
                weight_kg: 0.0,
                drone_eligible: true,
            });
        }
        let stations = (0..n_stations)
            .map(|idx| {
                let (x, y) = (coord(), coord());
                Station { id: idx as u32 + 1, x, y }
            })
            .collect();
        for c in customers.iter_mut() {
            c.weight_kg = PAYLOAD_KG * (1.0 - rng.gen::<f64>());
        }
        let inst = Instance {
            depot: Point::new(0.0, 0.0),
            customers,
            stations,
            params: params.clone(),
        };
        let net = build_augmented_network(&inst, params.m_copies);
        if mcws_initial(&net, &probe_model).is_ok() {
            return Ok(inst);
        }
    }
    Err(ModelError::InfeasibleConfiguration(MAX_REGENERATIONS))
}

/// A drone sortie: launched at `launch`, serving `customer`, retrieved at
/// `retrieve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[NodeId; 3]", into = "[NodeId; 3]")]
pub struct Sortie {
    pub launch: NodeId,
    pub customer: NodeId,
    pub retrieve: NodeId,
}

impl Sortie {
    pub fn new(launch: NodeId, customer: NodeId, retrieve: NodeId) -> Self {
        Sortie { launch, customer, retrieve }
    }
}

impl From<[NodeId; 3]> for Sortie {
    fn from(v: [NodeId; 3]) -> Self {
        Sortie::new(v[0], v[1], v[2])
    }
}

impl From<Sortie> for [NodeId; 3] {
    fn from(s: Sortie) -> Self {
        [s.launch, s.customer, s.retrieve]
    }
}

impl fmt::Display for Sortie {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.launch, self.customer, self.retrieve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    DepotStart,
    /// Index into `Instance::customers`.
    Customer(usize),
    /// Index into `Instance::stations` and copy number (0-based).
    Station { station: usize, copy: usize },
    DepotEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetNode {
    pub role: NodeRole,
    pub pos: Point,
}

/// The original network with `m` copies of every station, dense travel-time
/// matrices and the feasible sortie set.
///
/// Node ids: `0` is the depot start, `1..=c` the customers, then the station
/// copies grouped by copy number, and `c + m*s + 1` the depot end. Energy is
/// measured in seconds of travel, so the energy matrices coincide with the
/// time matrices.
#[derive(Debug, Clone)]
pub struct AugmentedNetwork {
    nodes: Vec<NetNode>,
    n_customers: usize,
    n_stations: usize,
    copies: usize,
    ev_time: Vec<f64>,
    drone_time: Vec<f64>,
    service: Vec<f64>,
    eligible: Vec<bool>,
    budget: Vec<f64>,
    customer_ids: Vec<u32>,
    station_ids: Vec<u32>,
    pub qt_s: f64,
    pub qd_s: f64,
    pub gamma: f64,
    pub launch_s: f64,
    pub retrieve_s: f64,
    sorties: Vec<Sortie>,
}

pub fn build_augmented_network(inst: &Instance, m: usize) -> AugmentedNetwork {
    let m = m.max(1);
    let c = inst.customers.len();
    let s = inst.stations.len();
    let n = c + m * s + 2;
    let mut nodes = Vec::with_capacity(n);
    nodes.push(NetNode { role: NodeRole::DepotStart, pos: inst.depot });
    for (idx, cust) in inst.customers.iter().enumerate() {
        nodes.push(NetNode { role: NodeRole::Customer(idx), pos: Point::new(cust.x, cust.y) });
    }
    for copy in 0..m {
        for (idx, st) in inst.stations.iter().enumerate() {
            nodes.push(NetNode {
                role: NodeRole::Station { station: idx, copy },
                pos: Point::new(st.x, st.y),
            });
        }
    }
    nodes.push(NetNode { role: NodeRole::DepotEnd, pos: inst.depot });

    let ev_per_km = 3600.0 / inst.params.ev_speed_kmh;
    let drone_per_km = 3600.0 / inst.params.drone_speed_kmh;
    let mut ev_time = vec![0.0; n * n];
    let mut drone_time = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            ev_time[i * n + j] = nodes[i].pos.manhattan(&nodes[j].pos) * ev_per_km;
            drone_time[i * n + j] = nodes[i].pos.euclidean(&nodes[j].pos) * drone_per_km;
        }
    }
    let mut service = vec![0.0; n];
    let mut eligible = vec![false; n];
    let mut budget = vec![0.0; n];
    for (idx, cust) in inst.customers.iter().enumerate() {
        service[idx + 1] = cust.service_time_s;
        eligible[idx + 1] = cust.drone_eligible;
        budget[idx + 1] = inst.drone_budget(cust);
    }
    let mut net = AugmentedNetwork {
        nodes,
        n_customers: c,
        n_stations: s,
        copies: m,
        ev_time,
        drone_time,
        service,
        eligible,
        budget,
        customer_ids: inst.customers.iter().map(|c| c.id).collect(),
        station_ids: inst.stations.iter().map(|s| s.id).collect(),
        qt_s: inst.params.qt_s,
        qd_s: inst.params.qd_s,
        gamma: inst.params.gamma,
        launch_s: inst.params.launch_s,
        retrieve_s: inst.params.retrieve_s,
        sorties: Vec::new(),
    };
    net.sorties = compute_sortie_set(&net);
    net
}

/// All triples `<i,j,k>` with `i` a launch-capable node, `j` a drone-eligible
/// customer, `k` a retrieve-capable node, pairwise distinct, and flight
/// energy `e_ij + e_jk` within the budget of `j`.
pub fn compute_sortie_set(net: &AugmentedNetwork) -> Vec<Sortie> {
    let mut out = Vec::new();
    for i in net.launch_nodes() {
        for j in net.customer_nodes() {
            for k in net.retrieve_nodes() {
                if net.is_sortie(i, j, k) {
                    out.push(Sortie::new(i, j, k));
                }
            }
        }
    }
    out
}

impl AugmentedNetwork {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_customers(&self) -> usize {
        self.n_customers
    }

    pub fn n_stations(&self) -> usize {
        self.n_stations
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn node(&self, id: NodeId) -> &NetNode {
        &self.nodes[id]
    }

    pub fn role(&self, id: NodeId) -> NodeRole {
        self.nodes[id].role
    }

    pub fn depot_start(&self) -> NodeId {
        0
    }

    pub fn depot_end(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn customer_node(&self, index: usize) -> NodeId {
        1 + index
    }

    pub fn station_copy(&self, station: usize, copy: usize) -> NodeId {
        1 + self.n_customers + copy * self.n_stations + station
    }

    /// External id of a customer or station node, as given in the instance.
    pub fn external_id(&self, id: NodeId) -> Option<u32> {
        match self.role(id) {
            NodeRole::Customer(idx) => Some(self.customer_ids[idx]),
            NodeRole::Station { station, .. } => Some(self.station_ids[station]),
            _ => None,
        }
    }

    pub fn is_customer(&self, id: NodeId) -> bool {
        matches!(self.role(id), NodeRole::Customer(_))
    }

    pub fn is_station(&self, id: NodeId) -> bool {
        matches!(self.role(id), NodeRole::Station { .. })
    }

    pub fn parent_station(&self, id: NodeId) -> Option<usize> {
        match self.role(id) {
            NodeRole::Station { station, .. } => Some(station),
            _ => None,
        }
    }

    pub fn customer_nodes(&self) -> std::ops::Range<NodeId> {
        1..1 + self.n_customers
    }

    pub fn station_nodes(&self) -> std::ops::Range<NodeId> {
        1 + self.n_customers..self.nodes.len() - 1
    }

    /// N_d: depot start, customers and station copies.
    pub fn launch_nodes(&self) -> std::ops::Range<NodeId> {
        0..self.nodes.len() - 1
    }

    /// N_a: customers, station copies and depot end.
    pub fn retrieve_nodes(&self) -> std::ops::Range<NodeId> {
        1..self.nodes.len()
    }

    pub fn ev_time(&self, i: NodeId, j: NodeId) -> f64 {
        self.ev_time[i * self.nodes.len() + j]
    }

    pub fn drone_time(&self, i: NodeId, j: NodeId) -> f64 {
        self.drone_time[i * self.nodes.len() + j]
    }

    /// EV energy of an arc in seconds of driving.
    pub fn ev_energy(&self, i: NodeId, j: NodeId) -> f64 {
        self.ev_time(i, j)
    }

    /// Drone energy of an arc in seconds of flight.
    pub fn drone_energy(&self, i: NodeId, j: NodeId) -> f64 {
        self.drone_time(i, j)
    }

    /// Flight energy of a sortie, `e_ij + e_jk`.
    pub fn sortie_energy(&self, s: &Sortie) -> f64 {
        self.drone_energy(s.launch, s.customer) + self.drone_energy(s.customer, s.retrieve)
    }

    /// EV battery fraction drained when launching sortie `s`.
    pub fn launch_drain(&self, s: &Sortie) -> f64 {
        self.gamma * self.sortie_energy(s) / self.qt_s
    }

    pub fn service(&self, id: NodeId) -> f64 {
        self.service[id]
    }

    pub fn drone_eligible(&self, id: NodeId) -> bool {
        self.eligible[id]
    }

    /// Flight budget for serving customer `j` by drone.
    pub fn budget(&self, j: NodeId) -> f64 {
        self.budget[j]
    }

    /// Membership test for the sortie set D.
    pub fn is_sortie(&self, i: NodeId, j: NodeId, k: NodeId) -> bool {
        let n = self.nodes.len();
        if i >= n || j >= n || k >= n || i == j || j == k || i == k {
            return false;
        }
        if i == self.depot_end() || k == self.depot_start() {
            return false;
        }
        if !self.is_customer(j) || !self.eligible[j] || self.budget[j] <= 0.0 {
            return false;
        }
        self.drone_energy(i, j) + self.drone_energy(j, k) <= self.budget[j] + 1e-9
    }

    pub fn sorties(&self) -> &[Sortie] {
        &self.sorties
    }
}
