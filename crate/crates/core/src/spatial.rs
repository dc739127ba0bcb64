//! A static 2D KD-tree for exact k-nearest-neighbour queries.
//!
//! Neighbours are ordered by `(squared distance, index)`, so results match a
//! linear scan exactly, ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bounds {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Bounds {
    fn of(points: &[[f64; 2]], idx: &[usize]) -> Self {
        let mut b = Bounds {
            lo: [f64::INFINITY; 2],
            hi: [f64::NEG_INFINITY; 2],
        };
        for &i in idx {
            for a in 0..2 {
                b.lo[a] = b.lo[a].min(points[i][a]);
                b.hi[a] = b.hi[a].max(points[i][a]);
            }
        }
        b
    }

    fn min_dist2(&self, q: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for a in 0..2 {
            let d = if q[a] < self.lo[a] {
                self.lo[a] - q[a]
            } else if q[a] > self.hi[a] {
                q[a] - self.hi[a]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
        bounds: Bounds,
    },
    Split {
        left: usize,
        right: usize,
        bounds: Bounds,
    },
}

impl Node {
    fn bounds(&self) -> &Bounds {
        match self {
            Node::Leaf { bounds, .. } | Node::Split { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 2]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }
}

#[derive(PartialEq)]
struct Candidate(Neighbor);

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .dist2
            .total_cmp(&other.0.dist2)
            .then(self.0.index.cmp(&other.0.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Linear-scan k-NN with the same ordering as [`KdTree::nearest`].
pub fn brute_force(points: &[[f64; 2]], q: [f64; 2], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, &p)| Neighbor {
            index,
            dist2: dist2(p, q),
        })
        .collect();
    all.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
    all.truncate(k);
    all
}

impl KdTree {
    /// Median-split construction.
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        let mut tree = KdTree {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        if !tree.points.is_empty() {
            tree.build(0, tree.points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let bounds = Bounds::of(&self.points, &self.order[start..end]);
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end, bounds });
            return id;
        }
        self.nodes.push(Node::Leaf { start, end, bounds });
        let axis = if bounds.hi[0] - bounds.lo[0] >= bounds.hi[1] - bounds.lo[1] {
            0
        } else {
            1
        };
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            left,
            right,
            bounds,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// The `k` nearest points to `q`, closest first.
    pub fn nearest(&self, q: [f64; 2], k: usize) -> Vec<Neighbor> {
        self.nearest_counted(q, k).0
    }

    /// Like [`nearest`](Self::nearest), also returning how many point
    /// distances were evaluated.
    pub fn nearest_counted(&self, q: [f64; 2], k: usize) -> (Vec<Neighbor>, usize) {
        let k = k.min(self.points.len());
        if k == 0 {
            return (Vec::new(), 0);
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut evaluated = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            // ties at the bound may still hold a lower index, so prune only on strict excess
            if heap.len() == k && node.bounds().min_dist2(q) > heap.peek().expect("full").0.dist2 {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &index in &self.order[*start..*end] {
                        evaluated += 1;
                        let c = Candidate(Neighbor {
                            index,
                            dist2: dist2(self.points[index], q),
                        });
                        if heap.len() < k {
                            heap.push(c);
                        } else if c < *heap.peek().expect("full") {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                }
                Node::Split { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().min_dist2(q);
                    let dr = self.nodes[*right].bounds().min_dist2(q);
                    // visit the closer child first
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        let mut out: Vec<Neighbor> = heap.into_iter().map(|c| c.0).collect();
        out.sort_by(|a, b| a.dist2.total_cmp(&b.dist2).then(a.index.cmp(&b.index)));
        (out, evaluated)
    }
}
