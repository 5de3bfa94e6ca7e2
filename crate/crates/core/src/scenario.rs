//! The cloud-allocation use-case graph and a seeded generator of telemetry
//! datasets with one injected failure cascade.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::clue::{SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::graph::{
    serialize_graph, AttributeDef, DataKind, EntityConcept, FilterDef, Hierarchy, KnowledgeGraph,
    RelationDef,
};
use crate::store::{
    CascadeStep, CauseClue, EventInterval, EventSequenceData, GroundTruth, IncidentExpectation,
    IncidentLog, Record, RecordTable, ScenarioKind, TelemetryStore, TimeSeriesData,
};

pub const ERROR_CODES: [&str; 5] = [
    "AllocationFailed",
    "NoRoomForAllocation",
    "OverconstrainedRequest",
    "QuotaExceeded",
    "TypeError",
];
const ERROR_WEIGHTS: [f64; 5] = [0.2, 0.1, 0.2, 0.25, 0.25];
pub const OS_TYPES: [&str; 2] = ["Linux", "Windows"];
pub const VM_SIZES: [&str; 4] = ["Standard_D2", "Standard_D4", "Standard_E8", "Standard_M128"];

fn attr(id: &str, kind: DataKind, query: &str) -> AttributeDef {
    AttributeDef {
        id: id.into(),
        name: id.into(),
        kind,
        query_template: query.into(),
        primary_kpi: false,
    }
}

fn record_filters() -> Vec<FilterDef> {
    let f = |id: &str, options: &[&str]| FilterDef {
        id: id.into(),
        name: id.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        f("ErrorCode", &ERROR_CODES),
        f("OSType", &OS_TYPES),
        f("VMSize", &VM_SIZES),
    ]
}

fn relation(id: &str, source: &str, semantic: &str, target: &str, hierarchy: Hierarchy) -> RelationDef {
    RelationDef {
        id: id.into(),
        source: source.into(),
        target: target.into(),
        semantic: semantic.into(),
        hierarchy,
        traversal_query: format!("links {id}"),
    }
}

/// Five concepts and nine relations describing VM allocation in a cloud
/// platform: areas contain zones, zones contain clusters, clusters host
/// allocations that customers request.
pub fn use_case_graph() -> KnowledgeGraph {
    use DataKind::*;
    let window = " during {t_start}..{t_end}";
    let count = |field: &str| format!("count records where {field}={{instance}}{{filter_clauses}}{window}");
    let series = |concept: &str, a: &str| format!("series {concept}/{{instance}}/{a}{window}");

    let mut zone_incidents = attr("IncidentCount", Number, &count("zone"));
    zone_incidents.primary_kpi = true;

    let concepts = vec![
        EntityConcept {
            id: "Area".into(),
            name: "Area".into(),
            attributes: vec![
                attr("IncidentCount", Number, &count("area")),
                attr("UnusedReservedVMs", Number, &series("Area", "UnusedReservedVMs")),
                attr("BuildVersionCount", Number, &series("Area", "BuildVersionCount")),
            ],
            filters: record_filters(),
            instance_query: "instances Area".into(),
        },
        EntityConcept {
            id: "Zone".into(),
            name: "Zone".into(),
            attributes: vec![
                zone_incidents,
                attr("UnusedReservedVMs", Number, &series("Zone", "UnusedReservedVMs")),
                attr("ErrorCodeCount", Number, &series("Zone", "ErrorCodeCount")),
                attr("AllocableNodes", Number, &series("Zone", "AllocableNodes")),
                attr("BuildVersionCount", Number, &series("Zone", "BuildVersionCount")),
                attr("Utilization", Number, &series("Zone", "Utilization")),
            ],
            filters: record_filters(),
            instance_query: "instances Zone".into(),
        },
        EntityConcept {
            id: "Cluster".into(),
            name: "Cluster".into(),
            attributes: vec![
                attr("UnusedReservedVMs", Number, &series("Cluster", "UnusedReservedVMs")),
                attr("Utilization", Number, &series("Cluster", "Utilization")),
                attr("Stability", Number, "series Zone/{parent}/Cluster/{instance}/Stability"),
                attr("BuildVersion", String, "events Cluster/{instance}/BuildVersion"),
                attr("NodeStates", Bag, "series Cluster/{instance}/nodes/*"),
            ],
            filters: vec![],
            instance_query: "instances Cluster".into(),
        },
        EntityConcept {
            id: "Customer".into(),
            name: "Customer".into(),
            attributes: vec![
                attr("IncidentCount", Number, &count("customer")),
                attr("ReservedVMs", Number, &series("Customer", "ReservedVMs")),
                attr("SkuMix", Set, "events Customer/{instance}/sku/*"),
            ],
            filters: record_filters(),
            instance_query: "instances Customer".into(),
        },
        EntityConcept {
            id: "Allocation".into(),
            name: "Allocation".into(),
            attributes: vec![
                attr("RequestRate", Number, &series("Allocation", "RequestRate")),
                attr("Status", String, "events Allocation/{instance}/Status"),
            ],
            filters: vec![],
            instance_query: "instances Allocation".into(),
        },
    ];

    use Hierarchy::*;
    let relations = vec![
        relation("area_contains_zone", "Area", "contains", "Zone", Contains),
        relation("zone_contains_cluster", "Zone", "contains", "Cluster", Contains),
        relation("cluster_hosts_allocation", "Cluster", "hosts", "Allocation", Contains),
        relation("customer_reserves_cluster", "Customer", "reserves", "Cluster", Lateral),
        relation("customer_requests_allocation", "Customer", "requests", "Allocation", Lateral),
        relation("customer_deploys_in_zone", "Customer", "deploys in", "Zone", Lateral),
        relation("customer_operates_in_area", "Customer", "operates in", "Area", Lateral),
        relation("allocation_placed_in_zone", "Allocation", "is placed in", "Zone", Lateral),
        relation("cluster_fails_over_to_cluster", "Cluster", "fails over to", "Cluster", Lateral),
    ];

    KnowledgeGraph { concepts, relations }.canonical()
}

/// Generator parameters. Counts are per parent; durations are in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub areas: usize,
    pub zones_per_area: usize,
    pub clusters_per_zone: usize,
    pub customers: usize,
    pub samples: usize,
    /// Sampling step in seconds.
    pub step: i64,
    pub start: i64,
    /// Samples between the build change and the incident spike.
    pub lag: usize,
    pub min_spike_len: usize,
    pub max_spike_len: usize,
    /// Baseline incidents per zone per sample.
    pub baseline_rate: f64,
    /// Extra incidents per sample in the affected zone during the spike.
    pub spike_rate: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::ReservationLeak,
            areas: 2,
            zones_per_area: 3,
            clusters_per_zone: 5,
            customers: 12,
            samples: 14 * 24,
            step: 3600,
            start: 1_700_006_400,
            lag: 48,
            min_spike_len: 12,
            max_spike_len: 18,
            baseline_rate: 1.5,
            spike_rate: 12.0,
        }
    }
}

/// Samples of context kept before the build change and after the spike.
const LEAD_MARGIN: usize = 30;
const TAIL_MARGIN: usize = 30;

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("areas", self.areas),
            ("zones_per_area", self.zones_per_area),
            ("clusters_per_zone", self.clusters_per_zone),
            ("customers", self.customers),
            ("min_spike_len", self.min_spike_len),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::invalid(format!("scenario `{name}` must be at least 1")));
        }
        if self.max_spike_len < self.min_spike_len {
            return Err(Error::invalid("max_spike_len is below min_spike_len"));
        }
        if self.step <= 0 {
            return Err(Error::invalid("step must be positive"));
        }
        if !(self.baseline_rate > 0.0 && self.spike_rate > 0.0) {
            return Err(Error::invalid("incident rates must be positive"));
        }
        let needed = self.lag + LEAD_MARGIN + self.max_spike_len + TAIL_MARGIN + 1;
        if self.samples < needed {
            return Err(Error::invalid(format!(
                "{} samples cannot fit the cascade; need at least {needed}",
                self.samples
            )));
        }
        Ok(())
    }
}

struct Topology {
    areas: Vec<String>,
    /// zone -> area
    zones: BTreeMap<String, String>,
    /// cluster -> zone
    clusters: BTreeMap<String, String>,
    customers: Vec<String>,
    /// (customer, cluster) -> allocation
    allocations: BTreeMap<(String, String), String>,
    /// customer -> zones it deploys in
    deploys: BTreeMap<String, BTreeSet<String>>,
    failover: Vec<(String, String)>,
}

impl Topology {
    fn build(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Self {
        let areas: Vec<String> = (1..=spec.areas).map(|i| format!("Area{i:02}")).collect();
        let mut zones = BTreeMap::new();
        let mut clusters = BTreeMap::new();
        let mut z = 0;
        let mut c = 0;
        for area in &areas {
            for _ in 0..spec.zones_per_area {
                z += 1;
                let zone = format!("Zone{z:02}");
                for _ in 0..spec.clusters_per_zone {
                    c += 1;
                    clusters.insert(format!("Cluster{c:02}"), zone.clone());
                }
                zones.insert(zone, area.clone());
            }
        }
        let customers: Vec<String> = (1..=spec.customers).map(|i| format!("Customer{i:02}")).collect();
        let zone_ids: Vec<String> = zones.keys().cloned().collect();
        let mut deploys: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut reservations: BTreeSet<(String, String)> = BTreeSet::new();
        for (i, customer) in customers.iter().enumerate() {
            let home = &zone_ids[i % zone_ids.len()];
            let mut mine = BTreeSet::from([home.clone()]);
            if rng.random_bool(0.5) {
                mine.insert(zone_ids.choose(rng).unwrap().clone());
            }
            for zone in &mine {
                let local: Vec<&String> = clusters.iter().filter(|(_, z)| *z == zone).map(|(c, _)| c).collect();
                let n = rng.random_range(1..=local.len().min(2));
                for cl in local.choose_multiple(rng, n) {
                    reservations.insert((customer.clone(), (*cl).clone()));
                }
            }
            deploys.insert(customer.clone(), mine);
        }
        // Every zone needs at least one tenant so incidents have a customer.
        for (i, zone) in zone_ids.iter().enumerate() {
            if !deploys.values().any(|zs| zs.contains(zone)) {
                let customer = &customers[i % customers.len()];
                deploys.get_mut(customer).unwrap().insert(zone.clone());
                let cl = clusters.iter().find(|(_, z)| *z == zone).unwrap().0;
                reservations.insert((customer.clone(), cl.clone()));
            }
        }
        let allocations = reservations
            .into_iter()
            .enumerate()
            .map(|(i, pair)| (pair, format!("Alloc{:03}", i + 1)))
            .collect();
        let mut failover = Vec::new();
        for zone in &zone_ids {
            let local: Vec<&String> = clusters.iter().filter(|(_, z)| *z == zone).map(|(c, _)| c).collect();
            if local.len() > 1 {
                for (i, cl) in local.iter().enumerate() {
                    failover.push(((*cl).clone(), local[(i + 1) % local.len()].clone()));
                }
            }
        }
        Topology {
            areas,
            zones,
            clusters,
            customers,
            allocations,
            deploys,
            failover,
        }
    }

    fn clusters_of(&self, zone: &str) -> Vec<&String> {
        self.clusters.iter().filter(|(_, z)| *z == zone).map(|(c, _)| c).collect()
    }

    fn zones_of(&self, area: &str) -> Vec<&String> {
        self.zones.iter().filter(|(_, a)| *a == area).map(|(z, _)| z).collect()
    }

    fn customers_in(&self, zone: &str) -> Vec<&String> {
        self.deploys
            .iter()
            .filter(|(_, zs)| zs.contains(zone))
            .map(|(c, _)| c)
            .collect()
    }

    fn links(&self) -> BTreeMap<String, Vec<(String, String)>> {
        let mut links: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut push = |table: &str, s: &str, t: &str| {
            links.entry(table.to_string()).or_default().push((s.to_string(), t.to_string()));
        };
        for (zone, area) in &self.zones {
            push("area_contains_zone", area, zone);
        }
        for (cluster, zone) in &self.clusters {
            push("zone_contains_cluster", zone, cluster);
        }
        for ((customer, cluster), alloc) in &self.allocations {
            push("cluster_hosts_allocation", cluster, alloc);
            push("customer_reserves_cluster", customer, cluster);
            push("customer_requests_allocation", customer, alloc);
            push("allocation_placed_in_zone", alloc, &self.clusters[cluster]);
        }
        for (customer, zones) in &self.deploys {
            let mut areas = BTreeSet::new();
            for zone in zones {
                push("customer_deploys_in_zone", customer, zone);
                areas.insert(self.zones[zone].clone());
            }
            for area in areas {
                push("customer_operates_in_area", customer, &area);
            }
        }
        for (a, b) in &self.failover {
            push("cluster_fails_over_to_cluster", a, b);
        }
        for rows in links.values_mut() {
            rows.sort();
            rows.dedup();
        }
        links
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

struct Signals<'a> {
    rng: &'a mut ChaCha8Rng,
    n: usize,
}

impl Signals<'_> {
    fn noise(&mut self, level: f64, sigma: f64) -> Vec<f64> {
        let normal = Normal::new(0.0, sigma).unwrap();
        (0..self.n).map(|_| level + normal.sample(self.rng)).collect()
    }

    /// Low-amplitude daily cycle under noise.
    fn periodic(&mut self, level: f64, amplitude: f64, sigma: f64) -> Vec<f64> {
        let phase = self.rng.random_range(0.0..24.0);
        let mut v = self.noise(level, sigma);
        for (i, x) in v.iter_mut().enumerate() {
            *x += amplitude * (std::f64::consts::TAU * (i as f64 + phase) / 24.0).sin();
        }
        v
    }

    fn poisson(&mut self, rate: f64) -> Vec<f64> {
        let p = Poisson::new(rate).unwrap();
        (0..self.n).map(|_| p.sample(self.rng)).collect()
    }
}

fn shift(v: &mut [f64], range: std::ops::Range<usize>, delta: f64) {
    for x in &mut v[range] {
        *x += delta;
    }
}

fn sum_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let mut r = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

fn status_for(code: &str) -> &'static str {
    match code {
        "QuotaExceeded" => "Failed/QuotaExceeded",
        "TypeError" => "Failed/ClientError",
        _ => "Failed/ComputeFailed",
    }
}

fn version_label(rng: &mut ChaCha8Rng) -> (u32, u32) {
    (rng.random_range(2300..2400), rng.random_range(1..9))
}

/// Generates a dataset in memory. Deterministic in `seed`.
pub fn generate_store(seed: u64, spec: &ScenarioSpec) -> Result<TelemetryStore> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = Topology::build(spec, &mut rng);
    let n = spec.samples;
    let step = spec.step;
    let ts: Vec<i64> = (0..n as i64).map(|i| spec.start + i * step).collect();
    let window = TimeRange::new(spec.start, spec.start + n as i64 * step)?;

    // Cascade placement.
    let spike_len = rng.random_range(spec.min_spike_len..=spec.max_spike_len);
    let lo = spec.lag + LEAD_MARGIN;
    let hi = n - spike_len - TAIL_MARGIN;
    let s = rng.random_range(lo..=hi);
    let e = s + spike_len;
    let b = s - spec.lag;
    let reserved: BTreeSet<&String> = topo.allocations.keys().map(|(_, cl)| cl).collect();
    let reserved: Vec<&String> = reserved.into_iter().collect();
    let cause_cluster = (*reserved.choose(&mut rng).unwrap()).clone();
    let cause_zone = topo.clusters[&cause_cluster].clone();
    let cause_area = topo.zones[&cause_zone].clone();
    let tenants: Vec<&(String, String)> = topo
        .allocations
        .keys()
        .filter(|(_, cl)| *cl == cause_cluster)
        .collect();
    let pair = *tenants.choose(&mut rng).unwrap();
    let (cause_customer, cause_alloc) = (pair.0.clone(), topo.allocations[pair].clone());
    let leak = spec.kind == ScenarioKind::ReservationLeak;
    let injected_code = if leak { "NoRoomForAllocation" } else { "AllocationFailed" };

    let mut sig = Signals { rng: &mut rng, n };
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut events: BTreeMap<String, Vec<EventInterval>> = BTreeMap::new();
    let at = |i: usize| spec.start + i as i64 * step;
    let whole = |label: String| vec![EventInterval { start: at(0), end: at(n), label }];

    // Clusters.
    let mut versions_per_zone: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut versions_after: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (cluster, zone) in &topo.clusters {
        let cause = *cluster == cause_cluster;
        let level = sig.rng.random_range(20.0..60.0);
        let mut urvm = sig.noise(level, 2.0);
        let mut util = sig.periodic(sig_level(0.55, 0.05, cluster), 0.01, 0.03);
        let stability = sig.noise(0.98, 0.005);
        let mut ready = sig.noise(120.0, 1.5);
        let drained = sig.noise(4.0, 1.0);
        let (major, minor) = version_label(sig.rng);
        let v1 = format!("build-{major}.{minor}");
        if cause {
            let v2 = format!("build-{}.{}", major + 1, 0);
            let v3 = format!("build-{}.{}", major + 1, 1);
            events.insert(
                format!("Cluster/{cluster}/BuildVersion"),
                vec![
                    EventInterval { start: at(0), end: at(b), label: v1.clone() },
                    EventInterval { start: at(b), end: at(e), label: v2.clone() },
                    EventInterval { start: at(e), end: at(n), label: v3.clone() },
                ],
            );
            versions_per_zone.entry(zone.clone()).or_default().insert(v1);
            versions_after.entry(zone.clone()).or_default().insert(v2);
            if leak {
                shift(&mut urvm, b..e, 25.0);
            } else {
                shift(&mut ready, b..e, -25.0);
                shift(&mut util, b..e, 0.2);
            }
        } else {
            events.insert(format!("Cluster/{cluster}/BuildVersion"), whole(v1.clone()));
            versions_per_zone.entry(zone.clone()).or_default().insert(v1.clone());
            versions_after.entry(zone.clone()).or_default().insert(v1);
        }
        series.insert(format!("Cluster/{cluster}/UnusedReservedVMs"), urvm);
        series.insert(format!("Cluster/{cluster}/Utilization"), util);
        series.insert(format!("Zone/{zone}/Cluster/{cluster}/Stability"), stability);
        series.insert(format!("Cluster/{cluster}/nodes/ready"), ready);
        series.insert(format!("Cluster/{cluster}/nodes/drained"), drained);
    }

    // Incidents.
    let weights = ERROR_WEIGHTS;
    let mut incidents = Vec::new();
    let mut push_incident = |rng: &mut ChaCha8Rng, i: usize, zone: &str, cluster: &str, customer: &str, code: &str| {
        let area = topo.zones[zone].clone();
        incidents.push(IncidentLog {
            timestamp: at(i) + rng.random_range(0..step),
            customer: customer.to_string(),
            area,
            zone: zone.to_string(),
            cluster: cluster.to_string(),
            status: status_for(code).to_string(),
            error_code: code.to_string(),
            os_type: OS_TYPES.choose(rng).unwrap().to_string(),
            vm_size: VM_SIZES.choose(rng).unwrap().to_string(),
            requested_vms: rng.random_range(1..=20),
        });
    };
    let base = Poisson::new(spec.baseline_rate).unwrap();
    let spike = Poisson::new(spec.spike_rate).unwrap();
    let mut platform_errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for zone in topo.zones.keys() {
        let clusters = topo.clusters_of(zone);
        let tenants = topo.customers_in(zone);
        for i in 0..n {
            let k = base.sample(sig.rng) as usize;
            for _ in 0..k {
                let cluster = (*clusters.choose(sig.rng).unwrap()).clone();
                let customer = (*tenants.choose(sig.rng).unwrap()).clone();
                let code = ERROR_CODES[pick_weighted(sig.rng, &weights)];
                push_incident(sig.rng, i, zone, &cluster, &customer, code);
            }
            if *zone == cause_zone && (s..e).contains(&i) {
                let k = spike.sample(sig.rng) as usize;
                for _ in 0..k {
                    let customer = if sig.rng.random_bool(0.8) {
                        cause_customer.clone()
                    } else {
                        (*tenants.choose(sig.rng).unwrap()).clone()
                    };
                    push_incident(sig.rng, i, zone, &cause_cluster, &customer, injected_code);
                }
            }
        }
        let mut errs = sig.poisson(8.0);
        if *zone == cause_zone {
            let extra = Poisson::new(30.0).unwrap();
            for x in &mut errs[s..e] {
                *x += extra.sample(sig.rng);
            }
        }
        platform_errors.insert(zone.clone(), errs);
    }
    incidents.sort_by(|a, b| (a.timestamp, &a.zone, &a.customer).cmp(&(b.timestamp, &b.zone, &b.customer)));

    // Zones.
    for (zone, _) in topo.zones.clone() {
        let mut urvm = sig.noise(0.0, 3.0);
        let mut util = vec![0.0; n];
        let clusters = topo.clusters_of(&zone);
        for c in &clusters {
            sum_into(&mut urvm, &series[&format!("Cluster/{c}/UnusedReservedVMs")]);
            sum_into(&mut util, &series[&format!("Cluster/{c}/Utilization")]);
        }
        let util: Vec<f64> = util.iter().map(|u| u / clusters.len() as f64).collect();
        let mut nodes = sig.noise(40.0 * clusters.len() as f64, 3.0);
        if zone == cause_zone {
            if leak {
                shift(&mut nodes, s..e, -30.0);
            } else {
                shift(&mut nodes, b..e, -30.0);
            }
        }
        let before = versions_per_zone[&zone].len() as f64;
        let mut vcount = vec![before; n];
        if zone == cause_zone {
            let during: BTreeSet<&String> = versions_per_zone[&zone].iter().chain(&versions_after[&zone]).collect();
            for x in &mut vcount[b..] {
                *x = during.len() as f64;
            }
        }
        series.insert(format!("Zone/{zone}/UnusedReservedVMs"), urvm);
        series.insert(format!("Zone/{zone}/Utilization"), util);
        series.insert(format!("Zone/{zone}/AllocableNodes"), nodes);
        series.insert(format!("Zone/{zone}/BuildVersionCount"), vcount);
        series.insert(format!("Zone/{zone}/ErrorCodeCount"), platform_errors.remove(&zone).unwrap());
    }

    // Areas.
    for area in &topo.areas {
        let mut urvm = sig.noise(0.0, 3.0);
        let mut vcount = vec![0.0; n];
        for z in topo.zones_of(area) {
            sum_into(&mut urvm, &series[&format!("Zone/{z}/UnusedReservedVMs")]);
            sum_into(&mut vcount, &series[&format!("Zone/{z}/BuildVersionCount")]);
        }
        series.insert(format!("Area/{area}/UnusedReservedVMs"), urvm);
        series.insert(format!("Area/{area}/BuildVersionCount"), vcount);
    }

    // Customers.
    for customer in &topo.customers {
        let level = sig.rng.random_range(50.0..200.0);
        let mut reserved = sig.noise(level, 3.0);
        if leak && *customer == cause_customer {
            shift(&mut reserved, b..e, 25.0);
        }
        series.insert(format!("Customer/{customer}/ReservedVMs"), reserved);
        for sku in ["Dsv5", "Esv5"] {
            let switch = sig.rng.random_range(1..n);
            let (first, second) = if sig.rng.random_bool(0.5) { ("active", "paused") } else { ("paused", "active") };
            let intervals = if sig.rng.random_bool(0.5) {
                vec![
                    EventInterval { start: at(0), end: at(switch), label: first.into() },
                    EventInterval { start: at(switch), end: at(n), label: second.into() },
                ]
            } else {
                whole(first.into())
            };
            events.insert(format!("Customer/{customer}/sku/{sku}"), intervals);
        }
    }

    // Allocations.
    for ((_, _), alloc) in &topo.allocations {
        let level = sig.rng.random_range(5.0..15.0);
        let mut rate = sig.noise(level, 1.0);
        if *alloc == cause_alloc {
            shift(&mut rate, s..e, 8.0);
            events.insert(
                format!("Allocation/{alloc}/Status"),
                vec![
                    EventInterval { start: at(0), end: at(s), label: "Succeeded".into() },
                    EventInterval { start: at(s), end: at(e), label: "Failed".into() },
                    EventInterval { start: at(e), end: at(n), label: "Succeeded".into() },
                ],
            );
        } else {
            events.insert(format!("Allocation/{alloc}/Status"), whole("Succeeded".into()));
        }
        series.insert(format!("Allocation/{alloc}/RequestRate"), rate);
    }

    // Ground truth.
    let spike_range = TimeRange::new(at(s), at(e))?;
    let in_spike = incidents
        .iter()
        .filter(|i| i.zone == cause_zone && spike_range.contains(i.timestamp))
        .count();
    let lag = spec.lag as i64;
    let mut cascade = vec![CascadeStep {
        key: SeriesKey::new("Cluster", &cause_cluster, "BuildVersion"),
        lag: 0,
    }];
    if leak {
        cascade.push(CascadeStep { key: SeriesKey::new("Cluster", &cause_cluster, "UnusedReservedVMs"), lag: 0 });
        cascade.push(CascadeStep { key: SeriesKey::new("Customer", &cause_customer, "ReservedVMs"), lag: 0 });
        cascade.push(CascadeStep { key: SeriesKey::new("Zone", &cause_zone, "UnusedReservedVMs"), lag: 0 });
        cascade.push(CascadeStep { key: SeriesKey::new("Zone", &cause_zone, "AllocableNodes"), lag });
    } else {
        cascade.push(CascadeStep { key: SeriesKey::new("Cluster", &cause_cluster, "NodeStates"), lag: 0 });
        cascade.push(CascadeStep { key: SeriesKey::new("Cluster", &cause_cluster, "Utilization"), lag: 0 });
        cascade.push(CascadeStep { key: SeriesKey::new("Zone", &cause_zone, "AllocableNodes"), lag: 0 });
    }
    cascade.push(CascadeStep { key: SeriesKey::new("Zone", &cause_zone, "ErrorCodeCount"), lag });
    cascade.push(CascadeStep { key: SeriesKey::new("Allocation", &cause_alloc, "RequestRate"), lag });
    cascade.push(CascadeStep { key: SeriesKey::new("Zone", &cause_zone, "IncidentCount"), lag });
    cascade.push(CascadeStep { key: SeriesKey::new("Area", &cause_area, "IncidentCount"), lag });

    let ground_truth = GroundTruth {
        seed,
        scenario: spec.kind,
        cause: CauseClue {
            key: SeriesKey::new("Cluster", &cause_cluster, "BuildVersion"),
            range: TimeRange::new(at(b), at(e))?,
        },
        cascade,
        anomaly: SeriesKey::new("Zone", &cause_zone, "IncidentCount"),
        injection_window: spike_range,
        lag,
        injected_filter: "ErrorCode".into(),
        injected_option: injected_code.into(),
        incidents: IncidentExpectation {
            zone: cause_zone.clone(),
            window: spike_range,
            count: in_spike,
            baseline: spec.baseline_rate * spike_len as f64,
        },
    };

    let series = series
        .into_iter()
        .map(|(k, v)| {
            let v = v.into_iter().map(round3).collect();
            Ok((k, TimeSeriesData::new(ts.clone(), v)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let events = events
        .into_iter()
        .map(|(k, v)| Ok((k, EventSequenceData::new(v)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let records = RecordTable {
        scope_fields: vec!["area".into(), "zone".into(), "cluster".into(), "customer".into()],
        filter_fields: vec!["ErrorCode".into(), "OSType".into(), "VMSize".into()],
        rows: incidents
            .iter()
            .map(|i| Record {
                timestamp: i.timestamp,
                scope: vec![i.area.clone(), i.zone.clone(), i.cluster.clone(), i.customer.clone()],
                filters: vec![i.error_code.clone(), i.os_type.clone(), i.vm_size.clone()],
                value: i.requested_vms as f64,
            })
            .collect(),
    };

    let mut instances = BTreeMap::new();
    instances.insert("Area".to_string(), topo.areas.clone());
    instances.insert("Zone".to_string(), topo.zones.keys().cloned().collect());
    instances.insert("Cluster".to_string(), topo.clusters.keys().cloned().collect());
    instances.insert("Customer".to_string(), topo.customers.clone());
    let mut allocs: Vec<String> = topo.allocations.values().cloned().collect();
    allocs.sort();
    instances.insert("Allocation".to_string(), allocs);

    TelemetryStore::from_parts(
        &format!("scenario-{seed}"),
        window,
        step,
        instances,
        topo.links(),
        series,
        events,
        incidents,
        records,
        Some(ground_truth),
    )
}

/// Per-cluster utilization level, stable across seeds for a given name.
fn sig_level(base: f64, spread: f64, name: &str) -> f64 {
    let h = name.bytes().fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64));
    base + spread * ((h % 100) as f64 / 100.0 - 0.5)
}

/// Writes a generated dataset and the use-case graph (`graph.json`) into
/// `dir`, returning the ground truth.
pub fn generate_scenario(seed: u64, spec: &ScenarioSpec, dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let dir = dir.as_ref();
    let store = generate_store(seed, spec)?;
    store.save(dir)?;
    fs::write(dir.join("graph.json"), serialize_graph(&use_case_graph())?)?;
    Ok(store.ground_truth().cloned().expect("generator always writes ground truth"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_graph;
    use crate::store::ClueData;

    #[test]
    fn use_case_graph_is_valid() {
        assert!(validate_graph(&use_case_graph()).is_valid());
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_scenario(1, &ScenarioSpec::default(), a.path()).unwrap();
        generate_scenario(1, &ScenarioSpec::default(), b.path()).unwrap();
        for entry in walk(a.path()) {
            let rel = entry.strip_prefix(a.path()).unwrap();
            assert_eq!(fs::read(&entry).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel:?}");
        }
    }

    fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
        let mut out = Vec::new();
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn zero_clusters_is_invalid() {
        let spec = ScenarioSpec { clusters_per_zone: 0, ..Default::default() };
        assert!(matches!(generate_store(1, &spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn build_change_precedes_spike_by_lag() {
        let spec = ScenarioSpec::default();
        let store = generate_store(1, &spec).unwrap();
        let g = use_case_graph();
        let gt = store.ground_truth().unwrap();
        assert_eq!(gt.cause.key.attribute, "BuildVersion");
        let ClueData::String { events } = store.query_clue(&g, &gt.cause.key, &store.window()).unwrap() else {
            panic!("cause must be an event sequence");
        };
        let change = events.intervals[1].start;
        assert_eq!(gt.injection_window.start - change, spec.lag as i64 * spec.step);
        for step in &gt.cascade {
            store.query_clue(&g, &step.key, &store.window()).unwrap();
        }
    }

    #[test]
    fn spike_exceeds_five_times_baseline() {
        for seed in 0..5 {
            let store = generate_store(seed, &ScenarioSpec::default()).unwrap();
            let gt = store.ground_truth().unwrap();
            let p = crate::clue::FilterPredicate::single("zone", &gt.incidents.zone);
            let got = store.query_incidents(&gt.incidents.window, Some(&p)).len();
            assert_eq!(got, gt.incidents.count);
            assert!(got as f64 >= 5.0 * gt.incidents.baseline, "seed {seed}: {got}");
        }
    }

    #[test]
    fn record_values_are_declared_options() {
        let store = generate_store(2, &ScenarioSpec::default()).unwrap();
        let g = use_case_graph();
        let zone = g.concept("Zone").unwrap();
        for (i, f) in store.records().filter_fields.iter().enumerate() {
            let options = store.filter_options(&g, zone, f).unwrap();
            assert!(store.records().rows.iter().all(|r| options.contains(&r.filters[i])));
        }
    }

    #[test]
    fn implicit_filter_options_come_from_event_labels() {
        let store = generate_store(2, &ScenarioSpec::default()).unwrap();
        let g = use_case_graph();
        let alloc = g.concept("Allocation").unwrap();
        assert_eq!(store.filter_options(&g, alloc, "Status").unwrap(), ["Failed", "Succeeded"]);
    }
}
