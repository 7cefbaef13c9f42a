use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        proba: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree grown by greedy Gini minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub n_classes: usize,
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn histogram(&self, idx: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &i in idx {
            h[self.y[i]] += 1;
        }
        h
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let n: usize = counts.iter().sum();
        let proba = counts.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(Node::Leaf { proba });
        self.nodes.len() - 1
    }

    /// Lowest weighted child Gini; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let d = self.x[idx[0]].len();
        let total = self.histogram(idx);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..d {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for pos in 0..n - 1 {
                left[self.y[order[pos]]] += 1;
                let (lo, hi) = (self.x[order[pos]][f], self.x[order[pos + 1]][f]);
                if lo == hi {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let impurity = (n_left as f64 * gini(&left) + n_right as f64 * gini(&right))
                    / n as f64;
                let threshold = lo + (hi - lo) / 2.0;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.histogram(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_done = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_done || idx.len() < 2 * self.min_leaf {
            return self.leaf(&counts);
        }
        let Some(split) = self.best_split(&idx) else {
            return self.leaf(&counts);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: Vec::new() });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }
}

impl DecisionTree {
    /// `max_depth = None` grows until purity or `min_leaf` stops it.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        max_depth: Option<usize>,
        min_leaf: usize,
    ) -> Result<Self> {
        super::check_training_set(x, y, n_classes)?;
        if max_depth == Some(0) {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        let mut b = Builder {
            x,
            y,
            n_classes,
            max_depth,
            min_leaf,
            nodes: Vec::new(),
        };
        b.grow((0..x.len()).collect(), 0);
        Ok(Self {
            n_classes,
            nodes: b.nodes,
        })
    }

    pub fn predict_proba(&self, q: &[f64]) -> Vec<f64> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { proba } => return proba.clone(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if q[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 5]), 0.5);
        assert_eq!(gini(&[7, 0]), 0.0);
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let t = DecisionTree::fit(&x, &[2, 2, 2], 3, None, 1).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_proba(&[9.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn xor_needs_two_levels() {
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = [0, 1, 1, 0];
        let t = DecisionTree::fit(&x, &y, 2, Some(2), 1).unwrap();
        // every first split leaves 50/50 children; ties select feature 0 at 0.5
        match &t.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            Node::Leaf { .. } => panic!("root should split"),
        }
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(t.predict_proba(row)[label], 1.0);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn depth_and_min_leaf_limits() {
        let x: Vec<Vec<f64>> = (0..32).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<usize> = (0..32).map(|i| i % 4).collect();
        let t = DecisionTree::fit(&x, &y, 4, Some(3), 1).unwrap();
        assert!(t.depth() <= 3);
        let t = DecisionTree::fit(&x, &y, 4, None, 8).unwrap();
        let mut reached = vec![0usize; t.nodes.len()];
        for row in &x {
            let mut at = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &t.nodes[at]
            {
                at = if row[*feature] <= *threshold { *left } else { *right };
            }
            reached[at] += 1;
        }
        for (n, count) in t.nodes.iter().zip(&reached) {
            if let Node::Leaf { .. } = n {
                assert!(*count >= 8);
            }
        }
        assert!(DecisionTree::fit(&x, &y, 4, Some(0), 1).is_err());
    }
}
