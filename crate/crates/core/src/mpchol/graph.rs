use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TaskKind {
    Potrf,
    Trsm,
    Syrk,
    Gemm,
}

/// A tile kernel. `i`, `j` locate the written tile and `k` is the panel step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Task {
    pub kind: TaskKind,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Task {
    pub fn potrf(k: usize) -> Self {
        Self { kind: TaskKind::Potrf, i: k, j: k, k }
    }
    pub fn trsm(i: usize, k: usize) -> Self {
        Self { kind: TaskKind::Trsm, i, j: k, k }
    }
    pub fn syrk(i: usize, k: usize) -> Self {
        Self { kind: TaskKind::Syrk, i, j: i, k }
    }
    pub fn gemm(i: usize, j: usize, k: usize) -> Self {
        Self { kind: TaskKind::Gemm, i, j, k }
    }

    /// The tile this task overwrites.
    pub fn output(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// Tiles read besides the output tile.
    pub fn inputs(&self) -> Vec<(usize, usize)> {
        match self.kind {
            TaskKind::Potrf => vec![],
            TaskKind::Trsm => vec![(self.k, self.k)],
            TaskKind::Syrk => vec![(self.i, self.k)],
            TaskKind::Gemm => vec![(self.i, self.k), (self.j, self.k)],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TaskKind::Potrf => write!(f, "POTRF({})", self.k),
            TaskKind::Trsm => write!(f, "TRSM({},{})", self.i, self.k),
            TaskKind::Syrk => write!(f, "SYRK({},{})", self.i, self.k),
            TaskKind::Gemm => write!(f, "GEMM({},{},{})", self.i, self.j, self.k),
        }
    }
}

/// Right-looking tiled Cholesky DAG.
#[derive(Debug, Clone)]
pub struct TaskGraph {
    n_tiles: usize,
    tasks: Vec<Task>,
    deps: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KernelCounts {
    pub potrf: usize,
    pub trsm: usize,
    pub syrk: usize,
    pub gemm: usize,
}

impl KernelCounts {
    pub fn total(&self) -> usize {
        self.potrf + self.trsm + self.syrk + self.gemm
    }
}

pub fn build_task_graph(n_tiles: usize) -> TaskGraph {
    let mut tasks = Vec::new();
    for k in 0..n_tiles {
        tasks.push(Task::potrf(k));
        for i in k + 1..n_tiles {
            tasks.push(Task::trsm(i, k));
        }
        for i in k + 1..n_tiles {
            tasks.push(Task::syrk(i, k));
            for j in k + 1..i {
                tasks.push(Task::gemm(i, j, k));
            }
        }
    }
    let index: HashMap<Task, usize> = tasks.iter().enumerate().map(|(n, t)| (*t, n)).collect();
    let id = |t: Task| index[&t];
    let mut deps = vec![Vec::new(); tasks.len()];
    for (n, t) in tasks.iter().enumerate() {
        let (i, j, k) = (t.i, t.j, t.k);
        let d = &mut deps[n];
        match t.kind {
            TaskKind::Potrf => {
                if k > 0 {
                    d.push(id(Task::syrk(k, k - 1)));
                }
            }
            TaskKind::Trsm => {
                d.push(id(Task::potrf(k)));
                if k > 0 {
                    d.push(id(Task::gemm(i, k, k - 1)));
                }
            }
            TaskKind::Syrk => {
                d.push(id(Task::trsm(i, k)));
                if k > 0 {
                    d.push(id(Task::syrk(i, k - 1)));
                }
            }
            TaskKind::Gemm => {
                d.push(id(Task::trsm(i, k)));
                d.push(id(Task::trsm(j, k)));
                if k > 0 {
                    d.push(id(Task::gemm(i, j, k - 1)));
                }
            }
        }
    }
    let mut dependents = vec![Vec::new(); tasks.len()];
    for (n, d) in deps.iter().enumerate() {
        for &p in d {
            dependents[p].push(n);
        }
    }
    TaskGraph {
        n_tiles,
        tasks,
        deps,
        dependents,
    }
}

impl TaskGraph {
    pub fn n_tiles(&self) -> usize {
        self.n_tiles
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> Task {
        self.tasks[id]
    }

    pub fn deps(&self, id: usize) -> &[usize] {
        &self.deps[id]
    }

    pub fn dependents(&self, id: usize) -> &[usize] {
        &self.dependents[id]
    }

    pub fn n_edges(&self) -> usize {
        self.deps.iter().map(Vec::len).sum()
    }

    pub fn kernel_counts(&self) -> KernelCounts {
        let mut c = KernelCounts::default();
        for t in &self.tasks {
            match t.kind {
                TaskKind::Potrf => c.potrf += 1,
                TaskKind::Trsm => c.trsm += 1,
                TaskKind::Syrk => c.syrk += 1,
                TaskKind::Gemm => c.gemm += 1,
            }
        }
        c
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.deps.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.len()).filter(|&n| indeg[n] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(n) = ready.pop() {
            order.push(n);
            for &m in &self.dependents[n] {
                indeg[m] -= 1;
                if indeg[m] == 0 {
                    ready.push(m);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choose(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_graphs() {
        let g = build_task_graph(1);
        assert_eq!(g.len(), 1);
        assert_eq!(g.n_edges(), 0);

        let g = build_task_graph(2);
        let names: Vec<String> = g.tasks().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["POTRF(0)", "TRSM(1,0)", "SYRK(1,0)", "POTRF(1)"]);
        assert_eq!(g.deps(1), &[0]);
        assert_eq!(g.deps(2), &[1]);
        assert_eq!(g.deps(3), &[2]);

        assert_eq!(build_task_graph(4).len(), 20);
    }

    #[test]
    fn counts_and_acyclicity() {
        for n in 1..12 {
            let g = build_task_graph(n);
            let c = g.kernel_counts();
            assert_eq!(c.potrf, n);
            assert_eq!(c.trsm, choose(n, 2));
            assert_eq!(c.syrk, choose(n, 2));
            assert_eq!(c.gemm, choose(n, 3));
            assert!(g.topological_order().is_some());
        }
    }

    #[test]
    fn unique_writer_per_step() {
        let g = build_task_graph(7);
        let mut seen = std::collections::HashSet::new();
        for t in g.tasks() {
            assert!(seen.insert((t.output(), t.k)), "{t} duplicates a write");
        }
    }
}
