//! Matching of consecutive snapshots and the adaptive alpha walk.

use std::collections::HashMap;

use ndarray::{s, Array2};
use rayon::prelude::*;

use super::spectrum::{Snapshot, SpectralPath};
use super::{Crossing, Diagnostics, EigenPath, FlowOptions, FlowResult};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, C64};

/// Eigenvalues closer than the cluster tolerance, treated as one subspace.
#[derive(Clone, Debug)]
struct Cluster {
    states: Vec<usize>,
    /// Orthonormal basis of the spanned subspace.
    basis: Array2<C64>,
    center: C64,
    side: f64,
    weight: f64,
    core: bool,
}

fn clusters(snap: &Snapshot, level: f64, tol: f64) -> Vec<Cluster> {
    let n = snap.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| snap.values[i].re.partial_cmp(&snap.values[j].re).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let nx = p[k];
            p[k] = r;
            k = nx;
        }
        r
    }
    for a in 0..n {
        let i = order[a];
        for &j in order.iter().skip(a + 1) {
            let scale = 1f64.max(snap.values[i].norm());
            if snap.values[j].re - snap.values[i].re > tol * scale {
                break;
            }
            if (snap.values[j] - snap.values[i]).norm() <= tol * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in &order {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Cluster> = groups
        .into_values()
        .map(|states| {
            let m = states.len() as f64;
            let center = states.iter().map(|&i| snap.values[i]).sum::<C64>() / m;
            let weight = states.iter().map(|&i| snap.boundary_weight[i]).sum::<f64>() / m;
            let mut cols = Array2::zeros((snap.vectors.nrows(), states.len()));
            for (k, &i) in states.iter().enumerate() {
                cols.column_mut(k).assign(&snap.vectors.column(i));
            }
            let basis = if states.len() == 1 { cols } else { orthonormalize(&cols, 1e-10) };
            let core = (center - snap.center).norm() < 0.5 * snap.window;
            Cluster { states, basis, center, side: center.re - level, weight, core }
        })
        .collect();
    out.sort_by(|a, b| a.states[0].cmp(&b.states[0]));
    out
}

fn below(c: &Cluster) -> bool {
    c.side <= 0.0
}

/// Outcome of comparing two snapshots.
pub(super) enum Matched {
    Clean {
        /// (direction, multiplicity, boundary weight, side at a, side at b,
        /// state of b carrying the crossing)
        events: Vec<(i32, usize, f64, f64, f64, usize)>,
        /// For each state of b: (predecessor state of a, overlap).
        links: Vec<Option<(usize, f64)>>,
    },
    Fail(String),
}

pub(super) fn match_snapshots(a: &Snapshot, b: &Snapshot, level: f64, opts: &FlowOptions) -> Matched {
    let ca = clusters(a, level, opts.cluster_tol);
    let cb = clusters(b, level, opts.cluster_tol);
    let stack = |cs: &[Cluster]| {
        let n = cs.first().map(|c| c.basis.nrows()).unwrap_or(0);
        let total: usize = cs.iter().map(|c| c.basis.ncols()).sum();
        let mut m = Array2::zeros((n, total));
        let mut offs = Vec::with_capacity(cs.len());
        let mut o = 0;
        for c in cs {
            let k = c.basis.ncols();
            m.slice_mut(s![.., o..o + k]).assign(&c.basis);
            offs.push((o, k));
            o += k;
        }
        (m, offs)
    };
    let (qa, oa) = stack(&ca);
    let (qb, ob) = stack(&cb);
    if qa.nrows() != qb.nrows() {
        return Matched::Fail("snapshot dimensions differ".into());
    }
    let g = qa.t().mapv(|z| z.conj()).dot(&qb);
    let mut w = Array2::<f64>::zeros((ca.len(), cb.len()));
    for (p, &(op, kp)) in oa.iter().enumerate() {
        for (q, &(oq, kq)) in ob.iter().enumerate() {
            w[[p, q]] = g.slice(s![op..op + kp, oq..oq + kq]).iter().map(|z| z.norm_sqr()).sum();
        }
    }
    // connected components of the overlap graph
    let na = ca.len();
    let mut parent: Vec<usize> = (0..na + cb.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for p in 0..na {
        for q in 0..cb.len() {
            if w[[p, q]] >= opts.edge_tol {
                let (rp, rq) = (root(&mut parent, p), root(&mut parent, na + q));
                if rp != rq {
                    parent[rq] = rp;
                }
            }
        }
    }
    let mut comps: HashMap<usize, (Vec<usize>, Vec<usize>)> = HashMap::new();
    for p in 0..na {
        let r = root(&mut parent, p);
        comps.entry(r).or_default().0.push(p);
    }
    for q in 0..cb.len() {
        let r = root(&mut parent, na + q);
        comps.entry(r).or_default().1.push(q);
    }
    let thr2 = opts.matching_threshold * opts.matching_threshold;
    let half_window = 0.5 * a.window.min(b.window);
    let mut keys: Vec<usize> = comps.keys().copied().collect();
    keys.sort_unstable();
    let mut events = Vec::new();
    for key in keys {
        let (ps, qs) = &comps[&key];
        let dim_a: usize = ps.iter().map(|&p| ca[p].states.len()).sum();
        let dim_b: usize = qs.iter().map(|&q| cb[q].states.len()).sum();
        let below_a: usize = ps.iter().filter(|&&p| below(&ca[p])).map(|&p| ca[p].states.len()).sum();
        let below_b: usize = qs.iter().filter(|&&q| below(&cb[q])).map(|&q| cb[q].states.len()).sum();
        let relevant = ps.iter().any(|&p| ca[p].core) || qs.iter().any(|&q| cb[q].core);
        let changes = below_a != below_b;
        let captured = ps.iter().all(|&p| {
            let cap: f64 = qs.iter().map(|&q| w[[p, q]]).sum();
            cap >= thr2 * ca[p].states.len() as f64
        }) && qs.iter().all(|&q| {
            let cap: f64 = ps.iter().map(|&p| w[[p, q]]).sum();
            cap >= thr2 * cb[q].states.len() as f64
        });
        if !relevant && (!changes || dim_a != dim_b || !captured) {
            // far from the line: states entering or leaving the window
            continue;
        }
        if dim_a != dim_b || !captured {
            return Matched::Fail(format!(
                "unmatched subspace near {:.6} (dims {dim_a}/{dim_b})",
                ps.first().map(|&p| ca[p].center.re).or(qs.first().map(|&q| cb[q].center.re)).unwrap_or(0.0)
            ));
        }
        let straddles = {
            let sides: Vec<bool> = ps.iter().map(|&p| below(&ca[p])).chain(qs.iter().map(|&q| below(&cb[q]))).collect();
            sides.iter().any(|&x| x) && sides.iter().any(|&x| !x)
        };
        if straddles && (ps.len() > 1 || qs.len() > 1) {
            // several subspaces mixing across the line: opposite crossings
            // can only be told apart if they share the bulk/boundary label
            let all: Vec<f64> = ps.iter().map(|&p| ca[p].weight).chain(qs.iter().map(|&q| cb[q].weight)).collect();
            let boundary = |x: f64| x >= opts.boundary_threshold;
            if !(all.iter().all(|&x| boundary(x)) || all.iter().all(|&x| !boundary(x))) {
                return Matched::Fail("bulk and boundary states mixing across the line".into());
            }
        }
        // eigenvalues must not move further than the window can vouch for
        for &p in ps {
            for &q in qs {
                if w[[p, q]] >= opts.edge_tol && (ca[p].center - cb[q].center).norm() > half_window {
                    return Matched::Fail("eigenvalue moved too far within one step".into());
                }
            }
        }
        if changes {
            let all: Vec<f64> = ps.iter().map(|&p| ca[p].weight).chain(qs.iter().map(|&q| cb[q].weight)).collect();
            let net = below_a as i64 - below_b as i64;
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let sa = ps.iter().map(|&p| ca[p].side).fold(f64::INFINITY, |m, x| if x.abs() < m.abs() { x } else { m });
            let sb = qs.iter().map(|&q| cb[q].side).fold(f64::INFINITY, |m, x| if x.abs() < m.abs() { x } else { m });
            let carrier = qs
                .iter()
                .min_by(|&&x, &&y| cb[x].side.abs().partial_cmp(&cb[y].side.abs()).unwrap())
                .map(|&q| cb[q].states[0])
                .unwrap_or(0);
            events.push((net.signum() as i32, net.unsigned_abs() as usize, mean, sa, sb, carrier));
        }
    }
    // predecessor links for the trajectory table
    let gs = a.vectors.t().mapv(|z| z.conj()).dot(&b.vectors);
    let mut taken = vec![false; a.values.len()];
    let mut links = vec![None; b.values.len()];
    for j in 0..b.values.len() {
        let (mut best, mut bi) = (0.0, usize::MAX);
        for i in 0..a.values.len() {
            let o = gs[[i, j]].norm();
            if o > best && !taken[i] {
                best = o;
                bi = i;
            }
        }
        if bi != usize::MAX && best >= opts.edge_tol.sqrt() {
            taken[bi] = true;
            links[j] = Some((bi, best));
        }
    }
    Matched::Clean { events, links }
}

fn key(alpha: f64) -> u64 {
    alpha.to_bits()
}

fn check_endpoint(snap: &Snapshot, level: f64, opts: &FlowOptions) -> Result<()> {
    for (i, z) in snap.values.iter().enumerate() {
        let bulk = snap.boundary_weight[i] < opts.boundary_threshold;
        if bulk && (z.re - level).abs() <= opts.tol_gap {
            return Err(Error::EndpointNotInvertible { alpha: snap.alpha, value: z.re, tol: opts.tol_gap });
        }
    }
    Ok(())
}

/// Walk the alpha grid, refining where matching fails or a crossing is
/// not yet localized.
pub fn track(path: &dyn SpectralPath, opts: &FlowOptions) -> Result<(FlowResult, EigenPath)> {
    if opts.grid_points < 2 {
        return Err(Error::Flow("alpha grid needs at least two points".into()));
    }
    let level = path.level();
    let n = opts.grid_points;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let base: Vec<Result<Snapshot>> = if opts.parallel {
        grid.par_iter().map(|&a| path.snapshot(a)).collect()
    } else {
        grid.iter().map(|&a| path.snapshot(a)).collect()
    };
    let mut cache: HashMap<u64, Snapshot> = HashMap::new();
    for s in base {
        let s = s?;
        cache.insert(key(s.alpha), s);
    }
    let mut diag = Diagnostics { evaluations: n, ..Default::default() };
    check_endpoint(&cache[&key(0.0)], level, opts)?;
    check_endpoint(&cache[&key(1.0)], level, opts)?;

    let mut points = grid.clone();
    let mut accepted: Vec<(f64, Vec<Crossing>)> = vec![(0.0, vec![])];
    let mut i = 1;
    let mut blocked: Vec<(f64, f64)> = Vec::new();
    let mut path_rec = EigenPath::new(opts.matching_threshold);
    let mut ids: Vec<usize> = (0..cache[&key(0.0)].values.len()).collect();
    let mut next_id = ids.len();
    path_rec.push_snapshot(&cache[&key(0.0)], &ids, &vec![1.0; ids.len()], level, opts);
    let mut snapshots_recorded: Vec<(f64, Vec<usize>, usize)> = vec![(0.0, ids.clone(), next_id)];

    while i < points.len() {
        let anchor = accepted.last().unwrap().0;
        let target = points[i];
        if !cache.contains_key(&key(target)) {
            if diag.evaluations >= opts.max_evaluations {
                return Err(Error::TrackMatching { a: anchor, b: target, reason: "evaluation budget exhausted".into() });
            }
            let s = path.snapshot(target)?;
            diag.evaluations += 1;
            cache.insert(key(target), s);
        }
        let (sa, sb) = (&cache[&key(anchor)], &cache[&key(target)]);
        let width = target - anchor;
        match match_snapshots(sa, sb, level, opts) {
            Matched::Clean { events, links } => {
                let jumps = blocked.iter().any(|&(lo, hi)| anchor <= lo && target >= hi);
                if !events.is_empty() && width > opts.localize_tol && !jumps {
                    points.insert(i, anchor + 0.5 * width);
                    diag.refinements += 1;
                    continue;
                }
                let crossings: Vec<Crossing> = events
                    .iter()
                    .map(|&(dir, mult, wgt, s0, s1, carrier)| {
                        let t = if (s1 - s0).abs() > 0.0 { (-s0 / (s1 - s0)).clamp(0.0, 1.0) } else { 0.5 };
                        Crossing {
                            alpha: anchor + t * width,
                            direction: dir,
                            multiplicity: mult,
                            track: carrier,
                            boundary_weight: wgt,
                            bulk: wgt < opts.boundary_threshold,
                        }
                    })
                    .collect();
                // carry track ids forward
                let mut new_ids = vec![usize::MAX; sb.values.len()];
                let mut overlaps = vec![0.0; sb.values.len()];
                for (j, l) in links.iter().enumerate() {
                    if let Some((p, o)) = l {
                        new_ids[j] = ids[*p];
                        overlaps[j] = *o;
                    }
                }
                for id in new_ids.iter_mut() {
                    if *id == usize::MAX {
                        *id = next_id;
                        next_id += 1;
                    }
                }
                let mut crossings = crossings;
                for c in crossings.iter_mut() {
                    c.track = new_ids[c.track];
                }
                path_rec.push_snapshot(sb, &new_ids, &overlaps, level, opts);
                ids = new_ids;
                snapshots_recorded.push((target, ids.clone(), next_id));
                accepted.push((target, crossings));
                i += 1;
            }
            Matched::Fail(reason) => {
                let across = blocked.iter().position(|&(lo, hi)| anchor <= lo && target >= hi);
                let region = match across {
                    Some(r) => {
                        let (lo, hi) = blocked[r];
                        let span = hi - lo;
                        if span > opts.max_jump {
                            return Err(Error::TrackMatching { a: anchor, b: target, reason });
                        }
                        blocked[r] = ((lo - 0.5 * span).max(0.0), (hi + 0.5 * span).min(1.0));
                        r
                    }
                    None if width > opts.min_step => {
                        points.insert(i, anchor + opts.split_fraction * width);
                        diag.refinements += 1;
                        continue;
                    }
                    None => {
                        blocked.push(((anchor - opts.jump).max(0.0), (target + opts.jump).min(1.0)));
                        blocked.len() - 1
                    }
                };
                let (lo, hi) = blocked[region];
                if lo <= 0.0 && hi >= 1.0 {
                    return Err(Error::TrackMatching { a: anchor, b: target, reason });
                }
                // rewind to the last anchor before the interval
                while accepted.len() > 1 && accepted.last().unwrap().0 > lo {
                    accepted.pop();
                    snapshots_recorded.pop();
                }
                path_rec.pop_until(accepted.last().unwrap().0);
                let (_, prev_ids, prev_next) = snapshots_recorded.last().unwrap().clone();
                ids = prev_ids;
                next_id = prev_next;
                let start = accepted.last().unwrap().0;
                points.retain(|&x| x <= start || x >= hi);
                if !points.iter().any(|&x| x == hi) {
                    let at = points.partition_point(|&x| x < hi);
                    points.insert(at, hi);
                }
                i = points.partition_point(|&x| x <= start);
            }
        }
    }
    diag.skipped = blocked;

    let crossings: Vec<Crossing> = accepted.into_iter().flat_map(|(_, c)| c).collect();
    diag.min_gap = points
        .iter()
        .filter_map(|a| cache.get(&key(*a)))
        .flat_map(|s| {
            s.values
                .iter()
                .zip(&s.boundary_weight)
                .filter(|(_, w)| **w < opts.boundary_threshold)
                .map(|(z, _)| (z.re - level).abs())
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min);
    diag.gross_crossings = crossings.iter().map(|c| c.multiplicity).sum();
    let net_flow = crossings.iter().filter(|c| c.bulk).map(|c| c.direction as i64 * c.multiplicity as i64).sum();
    let net_flow_all = crossings.iter().map(|c| c.direction as i64 * c.multiplicity as i64).sum();
    Ok((FlowResult { crossings, net_flow, net_flow_all, mode: path.mode(), diagnostics: diag }, path_rec))
}
