//! Axis-aligned bounding-volume hierarchy for exact nearest-element queries.

use crate::linalg::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3] }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        b.grow(o.min);
        b.grow(o.max);
        b
    }

    pub fn center(&self) -> Vec3 {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1]), 0.5 * (self.min[2] + self.max[2])]
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn dist_sq(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for a in 0..3 {
            let d = (self.min[a] - p[a]).max(p[a] - self.max[a]).max(0.0);
            s += d * d;
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bbox: Aabb, start: usize, end: usize },
    Inner { bbox: Aabb, left: usize, right: usize },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Tree over element indices; the root is node 0.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            build_node(boxes, &mut order, 0, boxes.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Element minimising `dist_sq(element)`; ties resolve to the lowest index,
    /// so the result equals a brute-force scan with the same tie rule.
    pub fn nearest<F>(&self, p: Vec3, dist_sq: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> f64,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if let Some((_, bd)) = best {
                if node.bbox().dist_sq(p) > bd {
                    continue;
                }
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &e in &self.order[*start..*end] {
                        let d = dist_sq(e);
                        let better = match best {
                            None => true,
                            Some((be, bd)) => d < bd || (d == bd && e < be),
                        };
                        if better {
                            best = Some((e, d));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    // visit the closer child first
                    let dl = self.nodes[*left].bbox().dist_sq(p);
                    let dr = self.nodes[*right].bbox().dist_sq(p);
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
        best
    }
}

fn build_node(boxes: &[Aabb], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut bbox = Aabb::empty();
    let mut centers = Aabb::empty();
    for &e in &order[start..end] {
        bbox = bbox.union(&boxes[e]);
        centers.grow(boxes[e].center());
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bbox, start, end });
        return id;
    }
    let axis = (0..3)
        .max_by(|&a, &b| (centers.max[a] - centers.min[a]).partial_cmp(&(centers.max[b] - centers.min[b])).unwrap())
        .unwrap();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        boxes[a].center()[axis].partial_cmp(&boxes[b].center()[axis]).unwrap().then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bbox, start, end }); // placeholder
    let left = build_node(boxes, order, start, mid, nodes);
    let right = build_node(boxes, order, mid, end, nodes);
    nodes[id] = Node::Inner { bbox, left, right };
    id
}
