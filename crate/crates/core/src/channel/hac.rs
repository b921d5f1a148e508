//! Agglomerative clustering of points with centroid linkage.
//!
//! Clusters are merged by smallest distance between their centroids; ties go
//! to the pair with the lowest indices. The dendrogram is then cut top-down
//! so that every final cluster holds at most a given number of points.

use crate::netgen::Point;

/// One merge step. Leaves are `0..n`; the merge at step `i` creates node
/// `n + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    num_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    fn size(&self, node: usize) -> usize {
        if node < self.num_leaves {
            1
        } else {
            self.merges[node - self.num_leaves].size
        }
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if n < self.num_leaves {
                out.push(n);
            } else {
                let m = self.merges[n - self.num_leaves];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
    }

    /// Walks down from the root and stops at the first node on each branch
    /// whose size is at most `max_size`. Each returned cluster is sorted.
    pub fn cut_by_size(&self, max_size: usize) -> Vec<Vec<usize>> {
        assert!(max_size >= 1);
        if self.num_leaves == 0 {
            return Vec::new();
        }
        let root = self.num_leaves + self.merges.len() - 1;
        let root = if self.merges.is_empty() { 0 } else { root };
        let mut clusters = Vec::new();
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if self.size(node) <= max_size {
                let mut c = Vec::new();
                self.leaves(node, &mut c);
                c.sort_unstable();
                clusters.push(c);
            } else {
                let m = self.merges[node - self.num_leaves];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        clusters
    }
}

/// Centroid-linkage agglomeration of `points`.
///
/// Keeps a nearest-neighbour cache per active cluster; only clusters whose
/// cached neighbour was consumed by a merge are rescanned.
pub fn centroid_linkage(points: &[Point]) -> Dendrogram {
    let n = points.len();
    let mut centroid: Vec<Point> = points.to_vec();
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut active = vec![true; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let rescan = |i: usize, centroid: &[Point], active: &[bool]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..centroid.len() {
            if j != i && active[j] {
                let d = centroid[i].dist(centroid[j]);
                if d < best.1 {
                    best = (j, d);
                }
            }
        }
        best
    };

    for i in 0..n {
        (nn[i], nn_dist[i]) = rescan(i, &centroid, &active);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        // Closest pair, lowest index on ties.
        let mut i = usize::MAX;
        for k in 0..n {
            if active[k] && (i == usize::MAX || nn_dist[k] < nn_dist[i]) {
                i = k;
            }
        }
        let j = nn[i];
        let (keep, drop) = (i.min(j), i.max(j));
        merges.push(Merge {
            left: node[keep],
            right: node[drop],
            distance: nn_dist[i],
            size: size[keep] + size[drop],
        });

        let (sk, sd) = (size[keep] as f64, size[drop] as f64);
        centroid[keep] = Point::new(
            (sk * centroid[keep].x + sd * centroid[drop].x) / (sk + sd),
            (sk * centroid[keep].y + sd * centroid[drop].y) / (sk + sd),
        );
        size[keep] += size[drop];
        node[keep] = n + step;
        active[drop] = false;

        for k in 0..n {
            if !active[k] || k == keep {
                continue;
            }
            if nn[k] == keep || nn[k] == drop {
                (nn[k], nn_dist[k]) = rescan(k, &centroid, &active);
            } else {
                let d = centroid[k].dist(centroid[keep]);
                if d < nn_dist[k] || (d == nn_dist[k] && keep < nn[k]) {
                    nn[k] = keep;
                    nn_dist[k] = d;
                }
            }
        }
        (nn[keep], nn_dist[keep]) = rescan(keep, &centroid, &active);
    }

    Dendrogram {
        num_leaves: n,
        merges,
    }
}
