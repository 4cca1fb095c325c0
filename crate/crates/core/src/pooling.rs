//! Pooling instances and their pq-formulation.
//!
//! Variables are the pool inflow proportions `q_il`, pool-to-product flows
//! `y_lj`, direct flows `z_ij` and product totals `f_j`. The products
//! `q_il y_lj` stay as bilinear terms; the relaxation introduces their
//! auxiliaries.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, UncertaintyError};
use crate::qcqp::{QcqpProblem, QuadExpr, UncertainConstraint, VariableBox};
use crate::uncertainty::{robust_counterpart, UncertaintySet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    pub name: String,
    pub cost: f64,
    #[serde(default)]
    pub availability: Option<f64>,
    pub quality: BTreeMap<String, f64>,
    #[serde(default)]
    pub perturbation: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub name: String,
    #[serde(default)]
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    pub price: f64,
    #[serde(default)]
    pub demand: Option<f64>,
    #[serde(default)]
    pub quality_lower: BTreeMap<String, f64>,
    pub quality_upper: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Arcs {
    #[serde(default)]
    pub feed_pool: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub pool_product: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub feed_product: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingInstance {
    #[serde(default)]
    pub name: String,
    pub feeds: Vec<Feed>,
    #[serde(default)]
    pub pools: Vec<Pool>,
    pub products: Vec<Product>,
    #[serde(default)]
    pub arcs: Arcs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    /// `Ĉ_ik = C_ik`.
    #[default]
    Equal,
    /// Use each feed's `perturbation` map, zero where absent.
    File,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

pub fn parse_instance(text: &str) -> Result<PoolingInstance, InstanceError> {
    let inst: PoolingInstance = serde_json::from_str(text)?;
    inst.validate()?;
    Ok(inst)
}

pub fn load_instance(path: &Path) -> Result<PoolingInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    let mut inst = parse_instance(&text)?;
    if inst.name.is_empty() {
        inst.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(inst)
}

fn check_nonneg(path: String, v: Option<f64>) -> Result<(), InstanceError> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => {
            Err(invalid(path, format!("must be finite and nonnegative, got {x}")))
        }
        _ => Ok(()),
    }
}

impl PoolingInstance {
    /// Quality names, taken from the first feed.
    pub fn qualities(&self) -> Vec<String> {
        self.feeds
            .first()
            .map(|f| f.quality.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.products.is_empty() {
            return Err(invalid("products", "no products"));
        }
        if self.feeds.is_empty() {
            return Err(invalid("feeds", "no feeds"));
        }
        let qualities: BTreeSet<String> = self.qualities().into_iter().collect();
        let mut names = BTreeSet::new();
        for (i, f) in self.feeds.iter().enumerate() {
            let path = format!("feeds[{i}]");
            if !names.insert(("feed", f.name.clone())) {
                return Err(invalid(format!("{path}.name"), "duplicate name"));
            }
            if !f.cost.is_finite() {
                return Err(invalid(format!("{path}.cost"), "must be finite"));
            }
            check_nonneg(format!("{path}.availability"), f.availability)?;
            let keys: BTreeSet<String> = f.quality.keys().cloned().collect();
            if keys != qualities {
                return Err(invalid(
                    format!("{path}.quality"),
                    format!("expected qualities {qualities:?}, got {keys:?}"),
                ));
            }
            for (k, v) in &f.quality {
                if !v.is_finite() {
                    return Err(invalid(format!("{path}.quality.{k}"), "must be finite"));
                }
            }
            for (k, v) in f.perturbation.iter().flatten() {
                if !qualities.contains(k) {
                    return Err(invalid(format!("{path}.perturbation.{k}"), "unknown quality"));
                }
                check_nonneg(format!("{path}.perturbation.{k}"), Some(*v))?;
            }
        }
        for (l, p) in self.pools.iter().enumerate() {
            if !names.insert(("pool", p.name.clone())) {
                return Err(invalid(format!("pools[{l}].name"), "duplicate name"));
            }
            check_nonneg(format!("pools[{l}].capacity"), p.capacity)?;
        }
        for (j, p) in self.products.iter().enumerate() {
            let path = format!("products[{j}]");
            if !names.insert(("product", p.name.clone())) {
                return Err(invalid(format!("{path}.name"), "duplicate name"));
            }
            if !p.price.is_finite() {
                return Err(invalid(format!("{path}.price"), "must be finite"));
            }
            check_nonneg(format!("{path}.demand"), p.demand)?;
            for (side, map) in [("quality_lower", &p.quality_lower), ("quality_upper", &p.quality_upper)] {
                for (k, v) in map {
                    if !qualities.contains(k) {
                        return Err(invalid(format!("{path}.{side}.{k}"), "unknown quality"));
                    }
                    if !v.is_finite() {
                        return Err(invalid(format!("{path}.{side}.{k}"), "must be finite"));
                    }
                }
            }
            for (k, lo) in &p.quality_lower {
                if let Some(hi) = p.quality_upper.get(k) {
                    if lo > hi {
                        return Err(invalid(
                            format!("{path}.quality_lower.{k}"),
                            format!("lower bound {lo} exceeds upper bound {hi}"),
                        ));
                    }
                }
            }
        }
        let feed = |s: &str| self.feeds.iter().any(|f| f.name == s);
        let pool = |s: &str| self.pools.iter().any(|p| p.name == s);
        let product = |s: &str| self.products.iter().any(|p| p.name == s);
        let lists: [(&str, &Option<Vec<(String, String)>>, &dyn Fn(&str) -> bool, &dyn Fn(&str) -> bool); 3] = [
            ("arcs.feed_pool", &self.arcs.feed_pool, &feed, &pool),
            ("arcs.pool_product", &self.arcs.pool_product, &pool, &product),
            ("arcs.feed_product", &self.arcs.feed_product, &feed, &product),
        ];
        for (path, list, src_ok, dst_ok) in lists {
            for (k, (a, b)) in list.iter().flatten().enumerate() {
                if !src_ok(a) || !dst_ok(b) {
                    return Err(invalid(format!("{path}[{k}]"), format!("unknown endpoint in ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    fn arc_set(
        list: &Option<Vec<(String, String)>>,
        src: &[String],
        dst: &[String],
    ) -> BTreeSet<(usize, usize)> {
        let pos = |names: &[String], s: &str| names.iter().position(|n| n == s).expect("validated");
        match list {
            Some(l) => l.iter().map(|(a, b)| (pos(src, a), pos(dst, b))).collect(),
            None => (0..src.len())
                .flat_map(|a| (0..dst.len()).map(move |b| (a, b)))
                .collect(),
        }
    }

    pub fn topology(&self) -> Topology {
        let feeds: Vec<String> = self.feeds.iter().map(|f| f.name.clone()).collect();
        let pools: Vec<String> = self.pools.iter().map(|p| p.name.clone()).collect();
        let products: Vec<String> = self.products.iter().map(|p| p.name.clone()).collect();
        Topology {
            feed_pool: Self::arc_set(&self.arcs.feed_pool, &feeds, &pools),
            pool_product: Self::arc_set(&self.arcs.pool_product, &pools, &products),
            feed_product: Self::arc_set(&self.arcs.feed_product, &feeds, &products),
        }
    }

    fn perturbation(&self, i: usize, k: &str, mode: PerturbationMode) -> f64 {
        match mode {
            PerturbationMode::Equal => self.feeds[i].quality[k],
            PerturbationMode::File => self.feeds[i]
                .perturbation
                .as_ref()
                .and_then(|m| m.get(k).copied())
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub feed_pool: BTreeSet<(usize, usize)>,
    pub pool_product: BTreeSet<(usize, usize)>,
    pub feed_product: BTreeSet<(usize, usize)>,
}

/// Column indices of the pq variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolingVariables {
    pub q: BTreeMap<(usize, usize), usize>,
    pub y: BTreeMap<(usize, usize), usize>,
    pub z: BTreeMap<(usize, usize), usize>,
    pub f: Vec<usize>,
}

impl PoolingVariables {
    /// `(q column, y column)` for every `v_ilj` term.
    pub fn bilinear_terms(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (&(_, l), &qc) in &self.q {
            for (&(l2, _), &yc) in &self.y {
                if l2 == l {
                    out.push((qc, yc));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledProblem {
    pub problem: QcqpProblem,
    pub vars: PoolingVariables,
    /// Uncertain constraint index for each `(product, quality, upper?)`.
    pub quality_rows: Vec<(usize, String, bool)>,
}

/// Flow through `(i → l → j)` plus the direct `(i → j)` flow, as an expression.
fn feed_to_product(vars: &PoolingVariables, i: usize, j: usize) -> QuadExpr {
    let mut e = QuadExpr::new();
    for (&(fi, l), &qc) in &vars.q {
        if fi != i {
            continue;
        }
        if let Some(&yc) = vars.y.get(&(l, j)) {
            e.add_bilinear(qc, yc, 1.0);
        }
    }
    if let Some(&zc) = vars.z.get(&(i, j)) {
        e.add_linear(zc, 1.0);
    }
    e
}

pub fn build_pq(inst: &PoolingInstance, mode: PerturbationMode) -> PooledProblem {
    let topo = inst.topology();
    let n_feed = inst.feeds.len();
    let n_prod = inst.products.len();
    let demand = |j: usize| inst.products[j].demand;

    // Throughput bound of each pool from capacity, reachable demand and supply.
    let pool_bound = |l: usize| -> f64 {
        let mut b = inst.pools[l].capacity.unwrap_or(f64::INFINITY);
        let out: Option<f64> = topo
            .pool_product
            .iter()
            .filter(|(p, _)| *p == l)
            .map(|&(_, j)| demand(j))
            .sum();
        if let Some(o) = out {
            b = b.min(o);
        }
        let supply: Option<f64> = topo
            .feed_pool
            .iter()
            .filter(|(_, p)| *p == l)
            .map(|&(i, _)| inst.feeds[i].availability)
            .sum();
        if let Some(s) = supply {
            b = b.min(s);
        }
        b
    };

    let mut names = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut vars = PoolingVariables::default();
    let mut push = |name: String, hi: f64| {
        names.push(name);
        lower.push(0.0);
        upper.push(hi);
        names.len() - 1
    };
    for &(i, l) in &topo.feed_pool {
        let c = push(format!("q[{},{}]", inst.feeds[i].name, inst.pools[l].name), 1.0);
        vars.q.insert((i, l), c);
    }
    let y_hi = |l: usize, j: usize| pool_bound(l).min(demand(j).unwrap_or(f64::INFINITY));
    let z_hi = |i: usize, j: usize| {
        inst.feeds[i]
            .availability
            .unwrap_or(f64::INFINITY)
            .min(demand(j).unwrap_or(f64::INFINITY))
    };
    for &(l, j) in &topo.pool_product {
        let c = push(format!("y[{},{}]", inst.pools[l].name, inst.products[j].name), y_hi(l, j));
        vars.y.insert((l, j), c);
    }
    for &(i, j) in &topo.feed_product {
        let c = push(format!("z[{},{}]", inst.feeds[i].name, inst.products[j].name), z_hi(i, j));
        vars.z.insert((i, j), c);
    }
    for j in 0..n_prod {
        let inflow: f64 = topo
            .pool_product
            .iter()
            .filter(|(_, pj)| *pj == j)
            .map(|&(l, _)| y_hi(l, j))
            .chain(topo.feed_product.iter().filter(|(_, pj)| *pj == j).map(|&(i, _)| z_hi(i, j)))
            .sum();
        let hi = demand(j).unwrap_or(f64::INFINITY).min(inflow);
        let c = push(format!("f[{}]", inst.products[j].name), hi);
        vars.f.push(c);
    }

    let mut p = QcqpProblem::new(names, VariableBox::new(lower, upper));

    // Objective: feed cost minus product revenue.
    let mut obj = QuadExpr::new();
    for j in 0..n_prod {
        let d = inst.products[j].price;
        for i in 0..n_feed {
            obj.add_scaled(&feed_to_product(&vars, i, j), inst.feeds[i].cost);
        }
        obj.add_linear(vars.f[j], -d);
    }
    obj.canonicalize();
    p.objective = obj;

    // Availability.
    for (i, feed) in inst.feeds.iter().enumerate() {
        if let Some(a) = feed.availability {
            let mut e = QuadExpr::constant(-a);
            for j in 0..n_prod {
                e.add_scaled(&feed_to_product(&vars, i, j), 1.0);
            }
            p.add_le(format!("availability[{}]", feed.name), e);
        }
    }
    // Pool capacity.
    for (l, pool) in inst.pools.iter().enumerate() {
        if let Some(s) = pool.capacity {
            let mut e = QuadExpr::constant(-s);
            for (&(pl, _), &c) in &vars.y {
                if pl == l {
                    e.add_linear(c, 1.0);
                }
            }
            p.add_le(format!("capacity[{}]", pool.name), e);
        }
    }
    // Demand and total flow definition.
    for (j, prod) in inst.products.iter().enumerate() {
        let mut flow = QuadExpr::new();
        for (&(_, pj), &c) in &vars.y {
            if pj == j {
                flow.add_linear(c, 1.0);
            }
        }
        for (&(_, pj), &c) in &vars.z {
            if pj == j {
                flow.add_linear(c, 1.0);
            }
        }
        if let Some(d) = prod.demand {
            p.add_le(format!("demand[{}]", prod.name), flow.clone().with_constant(-d));
        }
        p.add_eq(format!("total_flow[{}]", prod.name), flow.with_linear(vars.f[j], -1.0));
    }
    // Proportions sum to one in every pool that has inflow arcs.
    for (l, pool) in inst.pools.iter().enumerate() {
        let mut e = QuadExpr::constant(-1.0);
        let mut any = false;
        for (&(_, pl), &c) in &vars.q {
            if pl == l {
                e.add_linear(c, 1.0);
                any = true;
            }
        }
        if any {
            p.add_eq(format!("proportion[{}]", pool.name), e);
        }
    }
    // RLT: mass balance per pool-product arc.
    for (&(l, j), &yc) in &vars.y {
        let mut e = QuadExpr::new().with_linear(yc, -1.0);
        for (&(_, pl), &qc) in &vars.q {
            if pl == l {
                e.add_bilinear(qc, yc, 1.0);
            }
        }
        p.add_eq(
            format!("rlt_balance[{},{}]", inst.pools[l].name, inst.products[j].name),
            e,
        );
    }
    // RLT: capacity times proportion per feed-pool arc.
    for (&(i, l), &qc) in &vars.q {
        let s_bar = pool_bound(l);
        let mut e = QuadExpr::new().with_linear(qc, -s_bar);
        for (&(pl, _), &yc) in &vars.y {
            if pl == l {
                e.add_bilinear(qc, yc, 1.0);
            }
        }
        p.add_le(
            format!("rlt_capacity[{},{}]", inst.feeds[i].name, inst.pools[l].name),
            e,
        );
    }

    // Quality rows, uncertain in the feed qualities.
    let qualities = inst.qualities();
    let mut quality_rows = Vec::new();
    for (j, prod) in inst.products.iter().enumerate() {
        for (group, k) in qualities.iter().enumerate() {
            let sides = [
                (true, prod.quality_upper.get(k)),
                (false, prod.quality_lower.get(k)),
            ];
            for (upper_side, bound) in sides {
                let Some(&bound) = bound else { continue };
                let sign = if upper_side { 1.0 } else { -1.0 };
                let mut base = QuadExpr::new().with_linear(vars.f[j], -sign * bound);
                let mut perturbations = Vec::new();
                for i in 0..n_feed {
                    let flow = feed_to_product(&vars, i, j);
                    base.add_scaled(&flow, sign * inst.feeds[i].quality[k]);
                    let c_hat = inst.perturbation(i, k, mode);
                    let empty = flow.linear.is_empty() && flow.bilinear.is_empty();
                    if c_hat != 0.0 && !empty {
                        perturbations.push((i, flow.scaled(sign * c_hat)));
                    }
                }
                base.canonicalize();
                let side = if upper_side { "upper" } else { "lower" };
                let idx = p.add_uncertain(UncertainConstraint {
                    name: format!("quality_{side}[{},{k}]", prod.name),
                    base,
                    perturbations,
                    xi_dim: n_feed,
                    group,
                });
                debug_assert_eq!(idx, quality_rows.len());
                quality_rows.push((j, k.clone(), upper_side));
            }
        }
    }

    PooledProblem {
        problem: p,
        vars,
        quality_rows,
    }
}

/// Deterministic counterpart for box and budget sets.
pub fn build_dual_counterpart(
    inst: &PoolingInstance,
    mode: PerturbationMode,
    set: &UncertaintySet,
) -> Result<QcqpProblem, UncertaintyError> {
    robust_counterpart(&build_pq(inst, mode).problem, set)
}

/// Model size under the counting convention of the benchmark tables:
/// variables `q + y + z + v`; equations are availability, capacity and
/// demand rows per node, RLT capacity rows per feed-pool arc, proportion
/// rows per pool, balance rows per pool-product arc, quality rows present,
/// and one definition row per product term `v`. The LP count replaces each
/// definition row by four envelope rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub feeds: usize,
    pub pools: usize,
    pub products: usize,
    pub qualities: usize,
    pub variables: usize,
    pub qp_equations: usize,
    pub lp_equations: usize,
}

pub fn model_stats(inst: &PoolingInstance) -> ModelStats {
    let topo = inst.topology();
    let v: usize = topo
        .feed_pool
        .iter()
        .map(|&(_, l)| topo.pool_product.iter().filter(|(pl, _)| *pl == l).count())
        .sum();
    let variables = topo.feed_pool.len() + topo.pool_product.len() + topo.feed_product.len() + v;
    let quality_rows: usize = inst
        .products
        .iter()
        .map(|p| p.quality_lower.len() + p.quality_upper.len())
        .sum();
    let qp = inst.feeds.len()
        + inst.pools.len()
        + inst.products.len()
        + topo.feed_pool.len()
        + inst.pools.len()
        + topo.pool_product.len()
        + quality_rows
        + v;
    ModelStats {
        feeds: inst.feeds.len(),
        pools: inst.pools.len(),
        products: inst.products.len(),
        qualities: inst.qualities().len(),
        variables,
        qp_equations: qp,
        lp_equations: qp - v + 4 * v,
    }
}

/// `Σ_i q_il y_lj - y_lj` for every pool-product arc.
pub fn balance_residuals(pooled: &PooledProblem, point: &[f64]) -> Vec<f64> {
    pooled
        .vars
        .y
        .iter()
        .map(|(&(l, _), &yc)| {
            let s: f64 = pooled
                .vars
                .q
                .iter()
                .filter(|((_, pl), _)| *pl == l)
                .map(|(_, &qc)| point[qc])
                .sum();
            s * point[yc] - point[yc]
        })
        .collect()
}
