use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::{Task, TaskGraph, TaskKind};
use super::kernels;
use super::precision::{convert_values, tri_index, Precision, PrecisionGrid};
use super::tile::Tile;

/// Where narrowing conversions of shared operands happen. Both sites give
/// identical numbers; they differ only in how many conversions run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConversionSite {
    #[default]
    Sender,
    Receiver,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RunCounters {
    pub conversions: usize,
    pub saturations: usize,
}

#[derive(PartialEq, Eq)]
struct Ready {
    k: usize,
    kind: TaskKind,
    i: usize,
    j: usize,
    id: usize,
}

impl Ready {
    fn new(id: usize, t: Task) -> Self {
        Self {
            k: t.k,
            kind: t.kind,
            i: t.i,
            j: t.j,
            id,
        }
    }
}

impl Ord for Ready {
    // BinaryHeap pops the maximum, so the most urgent task must compare greatest.
    fn cmp(&self, other: &Self) -> CmpOrdering {
        (other.k, other.kind, other.i, other.j).cmp(&(self.k, self.kind, self.i, self.j))
    }
}

impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

struct Queue {
    heap: BinaryHeap<Ready>,
    done: usize,
    failed: Option<Error>,
}

struct Shared<'a> {
    graph: &'a TaskGraph,
    grid: &'a PrecisionGrid,
    site: ConversionSite,
    tiles: Vec<RwLock<Tile>>,
    sent: Vec<Mutex<Vec<(Precision, Arc<Vec<f64>>)>>>,
    remaining: Vec<AtomicUsize>,
    completed: Vec<AtomicBool>,
    queue: Mutex<Queue>,
    wake: Condvar,
    conversions: AtomicUsize,
    saturations: AtomicUsize,
    tile_size: usize,
}

/// Executes every task of `graph` over `tiles` with up to `workers` threads.
pub(crate) fn run(
    graph: &TaskGraph,
    grid: &PrecisionGrid,
    tile_size: usize,
    tiles: Vec<Tile>,
    workers: usize,
    site: ConversionSite,
) -> (Vec<Tile>, RunCounters, Option<Error>) {
    let n_tiles = tiles.len();
    let shared = Shared {
        graph,
        grid,
        site,
        tiles: tiles.into_iter().map(RwLock::new).collect(),
        sent: (0..n_tiles).map(|_| Mutex::new(Vec::new())).collect(),
        remaining: (0..graph.len()).map(|n| AtomicUsize::new(graph.deps(n).len())).collect(),
        completed: (0..graph.len()).map(|_| AtomicBool::new(false)).collect(),
        queue: Mutex::new(Queue {
            heap: (0..graph.len())
                .filter(|&n| graph.deps(n).is_empty())
                .map(|n| Ready::new(n, graph.task(n)))
                .collect(),
            done: 0,
            failed: None,
        }),
        wake: Condvar::new(),
        conversions: AtomicUsize::new(0),
        saturations: AtomicUsize::new(0),
        tile_size,
    };

    let workers = if cfg!(feature = "parallel") { workers.max(1) } else { 1 };
    if workers == 1 {
        shared.worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| shared.worker());
            }
        });
    }

    let counters = RunCounters {
        conversions: shared.conversions.into_inner(),
        saturations: shared.saturations.into_inner(),
    };
    let failed = shared.queue.into_inner().unwrap_or_else(|e| e.into_inner()).failed;
    let tiles = shared
        .tiles
        .into_iter()
        .map(|t| t.into_inner().unwrap_or_else(|e| e.into_inner()))
        .collect();
    (tiles, counters, failed)
}

impl Shared<'_> {
    fn worker(&self) {
        loop {
            let id = {
                let mut q = self.queue.lock().unwrap();
                loop {
                    if q.failed.is_some() || q.done == self.graph.len() {
                        return;
                    }
                    if let Some(r) = q.heap.pop() {
                        break r.id;
                    }
                    q = self.wake.wait(q).unwrap();
                }
            };
            debug_assert!(
                self.graph.deps(id).iter().all(|&d| self.completed[d].load(Ordering::Acquire)),
                "{} started before its dependencies finished",
                self.graph.task(id)
            );
            if let Err(e) = self.execute(id) {
                let mut q = self.queue.lock().unwrap();
                q.failed.get_or_insert(e);
                self.wake.notify_all();
                return;
            }
            self.completed[id].store(true, Ordering::Release);
            let ready: Vec<Ready> = self
                .graph
                .dependents(id)
                .iter()
                .filter(|&&d| self.remaining[d].fetch_sub(1, Ordering::AcqRel) == 1)
                .map(|&d| Ready::new(d, self.graph.task(d)))
                .collect();
            let mut q = self.queue.lock().unwrap();
            q.done += 1;
            q.heap.extend(ready);
            self.wake.notify_all();
        }
    }

    fn execute(&self, id: usize) -> Result<()> {
        let t = self.graph.task(id);
        let target = self.grid.get(t.i, t.j);
        let operands: Vec<(Arc<Vec<f64>>, usize, usize)> =
            t.inputs().into_iter().map(|(r, c)| self.operand(r, c, target)).collect();
        let out = tri_index(t.i, t.j);
        {
            let mut tile = self.tiles[out].write().unwrap();
            let (rows, cols) = (tile.rows(), tile.cols());
            let mut c = tile.to_f64();
            match t.kind {
                TaskKind::Potrf => kernels::potrf(&mut c, rows).map_err(|row| Error::NotPositiveDefinite {
                    tile: t.k,
                    row: t.k * self.tile_size + row,
                })?,
                TaskKind::Trsm => {
                    let (l, n, _) = &operands[0];
                    kernels::trsm(l, *n, &mut c, rows);
                }
                TaskKind::Syrk => {
                    let (a, _, inner) = &operands[0];
                    kernels::syrk(a, rows, *inner, &mut c);
                }
                TaskKind::Gemm => {
                    let (a, _, inner) = &operands[0];
                    let (b, _, _) = &operands[1];
                    kernels::gemm(a, rows, b, cols, *inner, &mut c);
                }
            }
            let sat = tile.store(&c);
            self.saturations.fetch_add(sat, Ordering::Relaxed);
        }
        if self.site == ConversionSite::Sender && matches!(t.kind, TaskKind::Potrf | TaskKind::Trsm) {
            self.send(id, out);
        }
        Ok(())
    }

    /// Operand tile `(r, c)` as seen by a consumer writing at `target`.
    fn operand(&self, r: usize, c: usize, target: Precision) -> (Arc<Vec<f64>>, usize, usize) {
        let idx = tri_index(r, c);
        let tile = self.tiles[idx].read().unwrap();
        let shape = (tile.rows(), tile.cols());
        if target >= tile.precision() {
            return (Arc::new(tile.to_f64()), shape.0, shape.1);
        }
        if self.site == ConversionSite::Sender {
            let cache = self.sent[idx].lock().unwrap();
            if let Some((_, v)) = cache.iter().find(|(p, _)| *p == target) {
                return (Arc::clone(v), shape.0, shape.1);
            }
        }
        let mut v = tile.to_f64();
        let sat = convert_values(&mut v, target);
        self.conversions.fetch_add(1, Ordering::Relaxed);
        self.saturations.fetch_add(sat, Ordering::Relaxed);
        (Arc::new(v), shape.0, shape.1)
    }

    /// Converts a freshly produced tile once for each narrower consumer precision.
    fn send(&self, id: usize, out: usize) {
        let t = self.graph.task(id);
        let src = self.grid.get(t.i, t.j);
        let mut targets: Vec<Precision> = self
            .graph
            .dependents(id)
            .iter()
            .map(|&d| self.graph.task(d))
            .filter(|d| d.inputs().contains(&(t.i, t.j)))
            .map(|d| self.grid.get(d.i, d.j))
            .filter(|&p| p < src)
            .collect();
        targets.sort();
        targets.dedup();
        if targets.is_empty() {
            return;
        }
        let base = self.tiles[out].read().unwrap().to_f64();
        let mut cache = self.sent[out].lock().unwrap();
        for p in targets {
            let mut v = base.clone();
            let sat = convert_values(&mut v, p);
            self.conversions.fetch_add(1, Ordering::Relaxed);
            self.saturations.fetch_add(sat, Ordering::Relaxed);
            cache.push((p, Arc::new(v)));
        }
    }
}
