use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Per-feature min-max scaling fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::Data("no rows to scale".into()))?;
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::Data(format!("row has {} features, expected {dim}", r.len())));
            }
            for (j, &x) in r.iter().enumerate() {
                mins[j] = mins[j].min(x);
                maxs[j] = maxs[j].max(x);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Ok(MinMaxScaler { mins, ranges })
    }

    /// Constant training columns map to 0.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mins.iter().zip(&self.ranges))
            .map(|(&x, (&lo, &range))| if range > 0.0 { (x - lo) / range } else { 0.0 })
            .collect()
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Candidate neighbour ordered by (distance, training index).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// KD-tree over scaled training rows.
#[derive(Clone, Debug)]
struct KdTree {
    nodes: Vec<Node>,
    /// Smallest training index under each node.
    min_index: Vec<usize>,
    order: Vec<usize>,
}

impl KdTree {
    fn build(points: &[Vec<f64>]) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            min_index: Vec::new(),
            order: (0..points.len()).collect(),
        };
        if !points.is_empty() {
            tree.build_node(points, 0, points.len());
        }
        tree
    }

    fn build_node(&mut self, points: &[Vec<f64>], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        self.min_index.push(self.order[start..end].iter().copied().min().expect("non-empty node"));
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dim = points[0].len();
        let slice = &self.order[start..end];
        let (mut best_dim, mut best_spread) = (0, 0.0);
        for d in 0..dim {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(points[i][d]), hi.max(points[i][d]))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            return id;
        }
        let mid = (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a][best_dim].total_cmp(&points[b][best_dim])
        });
        let value = points[self.order[start + mid]][best_dim];
        let left = self.build_node(points, start, start + mid);
        let right = self.build_node(points, start + mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    fn query(&self, points: &[Vec<f64>], q: &[f64], k: usize) -> Vec<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            let mut offsets = vec![0.0; q.len()];
            self.search(points, 0, q, k, 0.0, &mut offsets, &mut heap);
        }
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        points: &[Vec<f64>],
        node: usize,
        q: &[f64],
        k: usize,
        bound: f64,
        offsets: &mut [f64],
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    let c = Candidate {
                        dist: l1(&points[index], q),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("k >= 1") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(points, near, q, k, bound, offsets, heap);
                let old = offsets[dim];
                let far_bound = bound - old + diff.abs();
                // At equal distance only a lower index can displace the worst kept.
                let visit = heap.len() < k || {
                    let worst = heap.peek().expect("non-empty");
                    far_bound < worst.dist || (far_bound == worst.dist && self.min_index[far] < worst.index)
                };
                if visit {
                    offsets[dim] = diff.abs();
                    self.search(points, far, q, k, far_bound, offsets, heap);
                    offsets[dim] = old;
                }
            }
        }
    }
}

/// k-nearest-neighbour regressor: L1 distance on min-max scaled features,
/// uniform mean of the neighbours' labels, distance ties to the lower row.
#[derive(Clone, Debug)]
pub struct KnnModel {
    k: usize,
    feature_names: Vec<String>,
    scaler: MinMaxScaler,
    raw: Vec<Vec<f64>>,
    scaled: Vec<Vec<f64>>,
    labels: Vec<f64>,
    tree: KdTree,
}

#[derive(Serialize, Deserialize)]
struct KnnFile {
    format: String,
    schema: String,
    k: usize,
    metric: String,
    feature_names: Vec<String>,
    scaler: MinMaxScaler,
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

const FILE_FORMAT: &str = "phc-rtlos-knn/1";

impl KnnModel {
    pub fn fit(rows: Vec<Vec<f64>>, labels: Vec<f64>, k: usize, feature_names: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Data(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if k == 0 || k > rows.len() {
            return Err(Error::Config(format!("k = {k} with {} training rows", rows.len())));
        }
        let scaler = MinMaxScaler::fit(&rows)?;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r)).collect();
        let tree = KdTree::build(&scaled);
        Ok(KnnModel {
            k,
            feature_names,
            scaler,
            raw: rows,
            scaled,
            labels,
            tree,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Training indices of the k nearest rows, nearest first.
    pub fn neighbors(&self, features: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform(features);
        self.tree.query(&self.scaled, &q, self.k).into_iter().map(|c| c.index).collect()
    }

    /// Same as [`neighbors`](Self::neighbors) by scanning every training row.
    pub fn neighbors_exhaustive(&self, features: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform(features);
        let mut all: Vec<Candidate> = self
            .scaled
            .iter()
            .enumerate()
            .map(|(index, p)| Candidate { dist: l1(p, &q), index })
            .collect();
        all.sort();
        all.truncate(self.k);
        all.into_iter().map(|c| c.index).collect()
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let n = self.neighbors(features);
        n.iter().map(|&i| self.labels[i]).sum::<f64>() / n.len() as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = KnnFile {
            format: FILE_FORMAT.to_string(),
            schema: crate::simml::features::SCHEMA_VERSION.to_string(),
            k: self.k,
            metric: "manhattan".to_string(),
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
            rows: self.raw.clone(),
            labels: self.labels.clone(),
        };
        let out = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: KnnFile = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if file.format != FILE_FORMAT || file.metric != "manhattan" {
            return Err(Error::Data(format!("{}: unsupported model format", path.display())));
        }
        let mut model = KnnModel::fit(file.rows, file.labels, file.k, file.feature_names)?;
        // Keep the stored scaling so round trips never refit.
        model.scaled = model.raw.iter().map(|r| file.scaler.transform(r)).collect();
        model.scaler = file.scaler;
        model.tree = KdTree::build(&model.scaled);
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn one_dimensional_examples() {
        let m = KnnModel::fit(vec![vec![0.0], vec![10.0]], vec![0.0, 100.0], 1, names(1)).unwrap();
        assert_eq!(m.predict(&[1.0]), 0.0);
        let m = KnnModel::fit(vec![vec![0.0], vec![10.0]], vec![0.0, 100.0], 2, names(1)).unwrap();
        assert_eq!(m.predict(&[5.0]), 50.0);
        let m = KnnModel::fit(vec![vec![0.0], vec![4.0], vec![8.0]], vec![4.0, 9.0, 6.0], 2, names(1)).unwrap();
        assert_eq!(m.predict(&[4.0]), 6.5);
    }

    #[test]
    fn equidistant_neighbours_average() {
        let m = KnnModel::fit(vec![vec![0.0], vec![2.0], vec![9.0]], vec![4.0, 6.0, 50.0], 2, names(1)).unwrap();
        assert_eq!(m.predict(&[1.0]), 5.0);
    }

    #[test]
    fn training_point_is_its_own_neighbour() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels: Vec<f64> = (0..50).map(|i| i as f64 + 0.5).collect();
        let m = KnnModel::fit(rows.clone(), labels.clone(), 1, names(2)).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(m.predict(r), *l);
        }
    }

    #[test]
    fn ties_go_to_the_lower_row() {
        let rows = vec![vec![1.0], vec![1.0], vec![1.0], vec![3.0]];
        let m = KnnModel::fit(rows, vec![1.0, 2.0, 3.0, 4.0], 2, names(1)).unwrap();
        assert_eq!(m.neighbors(&[1.0]), vec![0, 1]);
        assert_eq!(m.neighbors_exhaustive(&[1.0]), vec![0, 1]);
    }

    #[test]
    fn invalid_k() {
        assert!(KnnModel::fit(vec![vec![0.0]], vec![1.0], 2, names(1)).is_err());
        assert!(KnnModel::fit(vec![vec![0.0]], vec![1.0], 0, names(1)).is_err());
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let s = MinMaxScaler::fit(&[vec![3.0, 1.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.transform(&[3.0, 3.0]), vec![0.0, 0.5]);
        assert_eq!(s.transform(&[7.0, 1.0]), vec![0.0, 0.0]);
    }

    fn random_model(seed: u64, n: usize, d: usize, k: usize, grid: bool) -> (KnnModel, Pcg64) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let draw = |rng: &mut Pcg64| {
            if grid {
                rng.gen_range(0..4) as f64
            } else {
                rng.gen::<f64>() * 10.0
            }
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| draw(&mut rng)).collect()).collect();
        let labels = (0..n).map(|_| rng.gen::<f64>()).collect();
        (KnnModel::fit(rows, labels, k, names(d)).unwrap(), rng)
    }

    #[test]
    fn accelerated_search_equals_exhaustive_scan() {
        for (seed, grid) in [(1, false), (2, true)] {
            let (m, mut rng) = random_model(seed, 3000, 6, 2, grid);
            for _ in 0..1000 {
                let q: Vec<f64> = (0..6)
                    .map(|_| if grid { rng.gen_range(0..4) as f64 } else { rng.gen::<f64>() * 10.0 })
                    .collect();
                assert_eq!(m.neighbors(&q), m.neighbors_exhaustive(&q));
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let (m, mut rng) = random_model(3, 200, 4, 2, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = KnnModel::load(&path).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 10.0).collect();
            assert_eq!(m.predict(&q), back.predict(&q));
        }
        back.save(&dir.path().join("again.json")).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(dir.path().join("again.json")).unwrap()
        );
    }

    proptest! {
        #[test]
        fn column_rescaling_leaves_predictions_unchanged(
            seed in 0u64..1000, col in 0usize..3, pow in -3i32..4
        ) {
            let (m, mut rng) = random_model(seed, 60, 3, 2, false);
            let c = 2f64.powi(pow);
            let mut rows = m.raw.clone();
            for r in rows.iter_mut() { r[col] *= c; }
            let scaled = KnnModel::fit(rows, m.labels.clone(), 2, names(3)).unwrap();
            for _ in 0..20 {
                let q: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 10.0).collect();
                let mut q2 = q.clone();
                q2[col] *= c;
                prop_assert_eq!(m.predict(&q), scaled.predict(&q2));
            }
        }
    }
}
