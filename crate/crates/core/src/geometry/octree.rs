//! Octree over a point set, used to fetch the points inside an axis-aligned
//! box without scanning the whole cloud.

const MAX_DEPTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    /// Box over `[x0, x1] × [y0, y1]` with unbounded z.
    pub fn column(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self::new([x0, y0, f64::NEG_INFINITY], [x1, y1, f64::INFINITY])
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && self.max[k] >= other.min[k])
    }

    fn inside(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] >= other.min[k] && self.max[k] <= other.max[k])
    }

    fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    fn octant(&self, octant: usize) -> Aabb {
        let c = self.center();
        let mut min = self.min;
        let mut max = self.max;
        for k in 0..3 {
            if octant & (1 << k) != 0 {
                min[k] = c[k];
            } else {
                max[k] = c[k];
            }
        }
        Aabb { min, max }
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf(Vec<u32>),
    /// Index of the first of eight consecutive children.
    Branch(u32),
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Octree spatial index. Owns a copy of the indexed positions; query results
/// are indices into the slice the index was built from.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    positions: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    leaf_capacity: usize,
}

impl SpatialIndex {
    pub fn build(positions: &[[f64; 3]], leaf_capacity: usize) -> Self {
        let leaf_capacity = leaf_capacity.max(1);
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in positions {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        if positions.is_empty() {
            min = [0.0; 3];
            max = [0.0; 3];
        }
        let mut index = Self {
            positions: positions.to_vec(),
            nodes: vec![Node {
                bounds: Aabb { min, max },
                kind: NodeKind::Leaf((0..positions.len() as u32).collect()),
            }],
            leaf_capacity,
        };
        index.split(0, 0);
        index
    }

    fn split(&mut self, node: usize, depth: usize) {
        let points = match &self.nodes[node].kind {
            NodeKind::Leaf(p) if p.len() > self.leaf_capacity && depth < MAX_DEPTH => p.clone(),
            _ => return,
        };
        let bounds = self.nodes[node].bounds;
        let c = bounds.center();
        let mut buckets: [Vec<u32>; 8] = Default::default();
        for i in points {
            let p = &self.positions[i as usize];
            let oct = (p[0] >= c[0]) as usize | ((p[1] >= c[1]) as usize) << 1 | ((p[2] >= c[2]) as usize) << 2;
            buckets[oct].push(i);
        }
        // All points coincide along every split axis: splitting cannot help.
        if buckets.iter().filter(|b| !b.is_empty()).count() == 1 && bounds.min == bounds.max {
            return;
        }
        let first = self.nodes.len() as u32;
        for (oct, bucket) in buckets.into_iter().enumerate() {
            self.nodes.push(Node { bounds: bounds.octant(oct), kind: NodeKind::Leaf(bucket) });
        }
        self.nodes[node].kind = NodeKind::Branch(first);
        for k in 0..8 {
            self.split(first as usize + k, depth + 1);
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        self.positions[i]
    }

    /// Indices of all points inside `query` (boundary inclusive), in
    /// ascending order.
    pub fn query(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_into(query, &mut out);
        out.sort_unstable();
        out
    }

    pub fn query_into(&self, query: &Aabb, out: &mut Vec<usize>) {
        if self.positions.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds.intersects(query) {
                continue;
            }
            match &node.kind {
                NodeKind::Leaf(points) => {
                    if node.bounds.inside(query) {
                        out.extend(points.iter().map(|&i| i as usize));
                    } else {
                        out.extend(
                            points
                                .iter()
                                .map(|&i| i as usize)
                                .filter(|&i| query.contains(&self.positions[i])),
                        );
                    }
                }
                NodeKind::Branch(first) => stack.extend(*first as usize..*first as usize + 8),
            }
        }
    }

    /// Every point is stored in exactly one leaf.
    pub fn leaf_population(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Leaf(p) => p.len(),
                NodeKind::Branch(_) => 0,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_scan(points: &[[f64; 3]], q: &Aabb) -> Vec<usize> {
        (0..points.len()).filter(|&i| q.contains(&points[i])).collect()
    }

    #[test]
    fn duplicate_points_terminate() {
        let pts = vec![[1.0, 1.0, 1.0]; 500];
        let index = SpatialIndex::build(&pts, 4);
        assert_eq!(index.leaf_population(), 500);
        assert_eq!(index.query(&Aabb::new([0.0; 3], [2.0; 3])).len(), 500);
    }

    #[test]
    fn empty_index_returns_nothing() {
        let index = SpatialIndex::build(&[], 4);
        assert!(index.query(&Aabb::column(-1.0, 1.0, -1.0, 1.0)).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn range_query_matches_linear_scan(
            pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -2.0..2.0f64), 0..2000),
            lo in (-11.0..11.0f64, -11.0..11.0f64, -3.0..3.0f64),
            size in (0.0..8.0f64, 0.0..8.0f64, 0.0..4.0f64),
            cap in 1usize..40,
        ) {
            let pts: Vec<[f64; 3]> = pts.into_iter().map(|(x, y, z)| [x, y, z]).collect();
            let index = SpatialIndex::build(&pts, cap);
            prop_assert_eq!(index.leaf_population(), pts.len());
            let q = Aabb::new([lo.0, lo.1, lo.2], [lo.0 + size.0, lo.1 + size.1, lo.2 + size.2]);
            prop_assert_eq!(index.query(&q), linear_scan(&pts, &q));
        }
    }
}
