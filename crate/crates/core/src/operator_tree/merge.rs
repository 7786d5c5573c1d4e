use super::{NodeInfo, OperatorNode, OperatorTree, ReducedNode, ReducedTree};

/// The merge-rule table: (critical parent, non-critical child it absorbs).
const RULES: [(&str, &str); 5] = [
    ("Hash Join", "Hash"),
    ("Merge Join", "Sort"),
    ("Bitmap Heap Scan", "Bitmap Index Scan"),
    ("Aggregate", "Sort"),
    ("Unique", "Sort"),
];

/// Whether a node of `parent` type absorbs a child of `child` type.
pub fn absorbs(parent: &str, child: &str) -> bool {
    RULES.iter().any(|&(p, c)| p == parent && c == child)
}

/// Applies the merge rules bottom-up until no (parent, child) pair matches.
pub fn merge_noncritical(tree: OperatorTree) -> ReducedTree {
    ReducedTree {
        root: reduce(tree.root),
    }
}

fn reduce(node: OperatorNode) -> ReducedNode {
    let children: Vec<ReducedNode> = node.children.into_iter().map(reduce).collect();
    let mut out = ReducedNode {
        info: node.info,
        merged_from: Vec::new(),
        child_sort_keys: Vec::new(),
        children,
    };
    let tracks_sides = out.info.node_type == "Merge Join";
    if tracks_sides {
        out.child_sort_keys = vec![Vec::new(); out.children.len()];
    }

    // An absorbed node's children may themselves match (e.g. Sort over Sort),
    // so repeat until a pass changes nothing.
    loop {
        let mut changed = false;
        let children = std::mem::take(&mut out.children);
        let side_keys = std::mem::take(&mut out.child_sort_keys);
        let mut side_keys = side_keys.into_iter();
        for child in children {
            let inherited = side_keys.next().unwrap_or_default();
            if !absorbs(&out.info.node_type, &child.info.node_type) {
                out.children.push(child);
                if tracks_sides {
                    out.child_sort_keys.push(inherited);
                }
                continue;
            }
            changed = true;
            let ReducedNode {
                info: absorbed,
                merged_from,
                children: grandchildren,
                ..
            } = child;
            adopt_fields(&mut out.info, &absorbed);
            if tracks_sides {
                let keys = if inherited.is_empty() { absorbed.sort_key.clone() } else { inherited };
                out.child_sort_keys
                    .extend(std::iter::repeat_n(keys, grandchildren.len()));
            }
            out.merged_from.push(absorbed);
            out.merged_from.extend(merged_from);
            out.children.extend(grandchildren);
        }
        if !changed {
            break;
        }
    }
    out
}

fn adopt_fields(absorber: &mut NodeInfo, absorbed: &NodeInfo) {
    if absorber.sort_key.is_empty() {
        absorber.sort_key = absorbed.sort_key.clone();
    }
    if absorber.index_name.is_none() {
        absorber.index_name = absorbed.index_name.clone();
    }
    if absorber.index_cond.is_none() {
        absorber.index_cond = absorbed.index_cond.clone();
    }
}
