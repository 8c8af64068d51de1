//! Hierarchy construction: input tiling, lateral adjacency, superior fan-in
//! and context wiring.

use std::fmt::Write as _;

use crate::error::{config_err, Result};
use crate::unit::UnitSpec;

/// Axis-aligned pixel rectangle in view-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Whether the closed boundaries of two disjoint rectangles meet. With
    /// `corners == false` the shared boundary must have positive length.
    pub fn touches(&self, other: &Rect, corners: bool) -> bool {
        let x_meet = self.x <= other.right() && other.x <= self.right();
        let y_meet = self.y <= other.bottom() && other.y <= self.bottom();
        if !(x_meet && y_meet) {
            return false;
        }
        if corners {
            return true;
        }
        let x_overlap = self.right().min(other.right()) > self.x.max(other.x);
        let y_overlap = self.bottom().min(other.bottom()) > self.y.max(other.y);
        x_overlap || y_overlap
    }
}

/// Structure of the input level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoveaMode {
    /// Uniform tiling.
    None,
    /// The central `k × k` block of input cells is split into 2×2 sub-tiles.
    Central(usize),
    /// Every input cell is split (uniform high resolution).
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub view_w: usize,
    pub view_h: usize,
    /// Grid edge per level, input level first.
    pub level_grids: Vec<usize>,
    pub fovea: FoveaMode,
    pub hidden_dim: usize,
    /// Count corner-only contact as touching when wiring subdivided input
    /// levels.
    pub corner_contact: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            view_w: 32,
            view_h: 32,
            level_grids: vec![16, 8, 4, 3, 2, 1],
            fovea: FoveaMode::None,
            hidden_dim: 8,
            corner_contact: true,
        }
    }
}

impl ModelConfig {
    /// The 16×16 view with an `[8, 4, 2, 1]` hierarchy used for quick
    /// experiments.
    pub fn desk_scale() -> Self {
        Self {
            view_w: 16,
            view_h: 16,
            level_grids: vec![8, 4, 2, 1],
            ..Self::default()
        }
    }

    pub fn with_fovea(mut self, fovea: FoveaMode) -> Self {
        self.fovea = fovea;
        self
    }

    /// Half the input grid, i.e. 8 for the default 16×16 grid.
    pub fn default_fovea_k(&self) -> usize {
        self.level_grids.first().copied().unwrap_or(0) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.view_w == 0 || self.view_h == 0 {
            return config_err("view must be non-empty");
        }
        if self.hidden_dim == 0 {
            return config_err("hidden_dim must be positive");
        }
        let Some(&g0) = self.level_grids.first() else {
            return config_err("level_grids is empty");
        };
        if self.level_grids.contains(&0) {
            return config_err("level grid sizes must be positive");
        }
        if self.level_grids.windows(2).any(|w| w[1] >= w[0]) {
            return config_err(format!(
                "level_grids must be strictly decreasing, got {:?}",
                self.level_grids
            ));
        }
        if *self.level_grids.last().unwrap() != 1 {
            return config_err("the top level must be a single unit");
        }
        if !self.view_w.is_multiple_of(g0) || !self.view_h.is_multiple_of(g0) {
            return config_err(format!(
                "view {}x{} is not divisible by the input grid {}",
                self.view_w, self.view_h, g0
            ));
        }
        let (tw, th) = (self.view_w / g0, self.view_h / g0);
        let subdivides = match self.fovea {
            FoveaMode::None | FoveaMode::Central(0) => false,
            FoveaMode::Central(k) if k > g0 => {
                return config_err(format!("fovea block {k} exceeds input grid {g0}"));
            }
            _ => true,
        };
        if subdivides && self.level_grids.len() == 1 {
            return config_err("a single-level hierarchy cannot subdivide its only unit");
        }
        if subdivides && (tw % 2 != 0 || th % 2 != 0) {
            return config_err(format!("input tiles {tw}x{th} cannot be split into 2x2 sub-tiles"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    pub grid: usize,
    pub first_unit: usize,
    pub n_units: usize,
}

impl Level {
    pub fn unit_ids(&self) -> std::ops::Range<usize> {
        self.first_unit..self.first_unit + self.n_units
    }
}

/// Immutable wiring of a whole hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyTopology {
    pub config: ModelConfig,
    pub levels: Vec<Level>,
    pub units: Vec<UnitSpec>,
    /// Sorted, symmetric, irreflexive.
    pub lateral: Vec<Vec<usize>>,
    pub superior: Vec<Vec<usize>>,
    pub inferior: Vec<Vec<usize>>,
    pub topmost_id: usize,
    /// Ordered context sources per unit, see [`context_layout`].
    pub context: Vec<Vec<usize>>,
}

/// Index range `[⌊i·n/m⌋, ⌊(i+1)·n/m⌋)` of inferior rows covered by superior
/// row `i` when an `n`-grid feeds an `m`-grid. Non-empty whenever `n ≥ m`.
fn block_range(i: usize, n: usize, m: usize) -> std::ops::Range<usize> {
    (i * n / m)..((i + 1) * n / m)
}

/// Superior grid index for inferior index `r`.
fn superior_index(r: usize, n: usize, m: usize) -> usize {
    (0..m)
        .find(|&i| block_range(i, n, m).contains(&r))
        .expect("proportional blocks cover the inferior grid")
}

fn grid_neighbors4(grid: usize, first: usize) -> Vec<Vec<usize>> {
    (0..grid * grid)
        .map(|idx| {
            let (r, c) = (idx / grid, idx % grid);
            let mut n = Vec::with_capacity(4);
            if r > 0 {
                n.push(first + idx - grid);
            }
            if c > 0 {
                n.push(first + idx - 1);
            }
            if c + 1 < grid {
                n.push(first + idx + 1);
            }
            if r + 1 < grid {
                n.push(first + idx + grid);
            }
            n
        })
        .collect()
}

impl HierarchyTopology {
    /// Builds the hierarchy described by `config`.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let g0 = config.level_grids[0];
        let (tw, th) = (config.view_w / g0, config.view_h / g0);
        let fovea_block = match config.fovea {
            FoveaMode::None => 0..0,
            FoveaMode::Central(k) => {
                let start = (g0 - k) / 2;
                start..start + k
            }
            FoveaMode::Full => 0..g0,
        };
        let subdivided = |r: usize, c: usize| fovea_block.contains(&r) && fovea_block.contains(&c);

        // Input level: tiles plus the grid cell each one came from.
        let mut tiles = Vec::new();
        let mut parent_cell = Vec::new();
        for r in 0..g0 {
            for c in 0..g0 {
                let (x, y) = (c * tw, r * th);
                if subdivided(r, c) {
                    let (hw, hh) = (tw / 2, th / 2);
                    for (dy, dx) in [(0, 0), (0, hw), (hh, 0), (hh, hw)] {
                        tiles.push(Rect { x: x + dx, y: y + dy, w: hw, h: hh });
                        parent_cell.push((r, c));
                    }
                } else {
                    tiles.push(Rect { x, y, w: tw, h: th });
                    parent_cell.push((r, c));
                }
            }
        }

        let mut levels = vec![Level { grid: g0, first_unit: 0, n_units: tiles.len() }];
        for &g in &config.level_grids[1..] {
            let first = levels.last().map(|l| l.first_unit + l.n_units).unwrap();
            levels.push(Level { grid: g, first_unit: first, n_units: g * g });
        }
        let n_units = levels.last().map(|l| l.first_unit + l.n_units).unwrap();
        let topmost_id = n_units - 1;

        // Lateral edges.
        let mut lateral: Vec<Vec<usize>> = vec![Vec::new(); n_units];
        if config.fovea == FoveaMode::None || fovea_block.is_empty() {
            for (id, n) in grid_neighbors4(g0, 0).into_iter().enumerate() {
                lateral[id] = n;
            }
        } else {
            for a in 0..tiles.len() {
                for b in (a + 1)..tiles.len() {
                    if tiles[a].touches(&tiles[b], config.corner_contact) {
                        lateral[a].push(b);
                        lateral[b].push(a);
                    }
                }
            }
        }
        for level in &levels[1..] {
            for (k, n) in grid_neighbors4(level.grid, level.first_unit).into_iter().enumerate() {
                lateral[level.first_unit + k] = n;
            }
        }
        for l in &mut lateral {
            l.sort_unstable();
        }

        // Superior fan-in.
        let mut superior: Vec<Vec<usize>> = vec![Vec::new(); n_units];
        let mut inferior: Vec<Vec<usize>> = vec![Vec::new(); n_units];
        for li in 0..levels.len() - 1 {
            let (lower, upper) = (&levels[li], &levels[li + 1]);
            let (n, m) = (lower.grid, upper.grid);
            for id in lower.unit_ids() {
                let (r, c) = if li == 0 {
                    parent_cell[id]
                } else {
                    let k = id - lower.first_unit;
                    (k / n, k % n)
                };
                let sup = upper.first_unit + superior_index(r, n, m) * m + superior_index(c, n, m);
                superior[id].push(sup);
                inferior[sup].push(id);
            }
        }
        for v in superior.iter_mut().chain(inferior.iter_mut()) {
            v.sort_unstable();
        }

        let mut topo = Self {
            config: config.clone(),
            levels,
            units: Vec::with_capacity(n_units),
            lateral,
            superior,
            inferior,
            topmost_id,
            context: Vec::new(),
        };
        topo.context = (0..n_units).map(|id| context_layout(&topo, id)).collect();

        let hidden = config.hidden_dim;
        for id in 0..n_units {
            let level = topo.level_of(id);
            let (signal_dim, tile) = match tiles.get(id) {
                Some(t) => (t.area() * 3, Some(*t)),
                None => (topo.inferior[id].len() * hidden, None),
            };
            let spec = UnitSpec {
                unit_id: id,
                level,
                signal_dim,
                hidden_dim: hidden,
                context_dim: topo.context[id].len() * hidden,
                tile,
            };
            spec.validate()?;
            topo.units.push(spec);
        }
        Ok(topo)
    }

    pub fn build_uniform(config: &ModelConfig) -> Result<Self> {
        Self::build(&config.clone().with_fovea(FoveaMode::None))
    }

    /// Splits the central block; `k` defaults to half the input grid when
    /// the config does not already name one.
    pub fn build_foveated(config: &ModelConfig) -> Result<Self> {
        let k = match config.fovea {
            FoveaMode::Central(k) => k,
            _ => config.default_fovea_k(),
        };
        Self::build(&config.clone().with_fovea(FoveaMode::Central(k)))
    }

    pub fn build_uhr(config: &ModelConfig) -> Result<Self> {
        Self::build(&config.clone().with_fovea(FoveaMode::Full))
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn input_level(&self) -> &Level {
        &self.levels[0]
    }

    pub fn level_of(&self, unit_id: usize) -> usize {
        self.levels
            .iter()
            .position(|l| l.unit_ids().contains(&unit_id))
            .expect("unit id out of range")
    }

    /// Human-readable adjacency listing, one unit per line.
    pub fn adjacency_listing(&self) -> String {
        let mut out = String::new();
        for (li, level) in self.levels.iter().enumerate() {
            let _ = writeln!(out, "# level {li}: grid {0}x{0}, {1} units", level.grid, level.n_units);
        }
        for u in &self.units {
            let _ = write!(out, "unit {} level {}", u.unit_id, u.level);
            if let Some(t) = u.tile {
                let _ = write!(out, " tile ({},{} {}x{})", t.x, t.y, t.w, t.h);
            }
            let _ = writeln!(
                out,
                " lateral {:?} superior {:?} inferior {:?} context {:?}",
                self.lateral[u.unit_id],
                self.superior[u.unit_id],
                self.inferior[u.unit_id],
                self.context[u.unit_id]
            );
        }
        out
    }
}

/// Context sources of a unit: itself, its laterals ascending, its superiors
/// ascending, then the topmost unit unless already listed.
pub fn context_layout(topology: &HierarchyTopology, unit_id: usize) -> Vec<usize> {
    let mut layout = vec![unit_id];
    layout.extend(&topology.lateral[unit_id]);
    layout.extend(&topology.superior[unit_id]);
    if !layout.contains(&topology.topmost_id) {
        layout.push(topology.topmost_id);
    }
    layout
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> HierarchyTopology {
        HierarchyTopology::build_uniform(&ModelConfig::default()).unwrap()
    }

    #[test]
    fn default_level_counts() {
        let t = base();
        let counts: Vec<usize> = t.levels.iter().map(|l| l.n_units).collect();
        assert_eq!(counts, vec![256, 64, 16, 9, 4, 1]);
        let area: usize = t.units.iter().filter_map(|u| u.tile).map(|r| r.area()).sum();
        assert_eq!(area, 1024);
        assert!(t.units[..256].iter().all(|u| u.signal_dim == 12));
    }

    #[test]
    fn single_unit_hierarchy() {
        let cfg = ModelConfig { view_w: 4, view_h: 4, level_grids: vec![1], ..ModelConfig::default() };
        let t = HierarchyTopology::build(&cfg).unwrap();
        assert_eq!(t.n_units(), 1);
        assert_eq!(t.topmost_id, 0);
        assert!(t.lateral[0].is_empty());
        assert_eq!(t.context[0], vec![0]);
        assert_eq!(t.units[0].context_dim, 8);
    }

    #[test]
    fn foveated_counts_and_inheritance() {
        let t = HierarchyTopology::build_foveated(&ModelConfig::default()).unwrap();
        assert_eq!(t.input_level().n_units, 448);
        let area: usize = t.units.iter().filter_map(|u| u.tile).map(|r| r.area()).sum();
        assert_eq!(area, 1024);

        // Every 1-pixel child shares its superior with its siblings.
        let base = base();
        for u in t.units.iter().filter(|u| u.tile.map(|r| r.area()) == Some(1)) {
            let tile = u.tile.unwrap();
            let parent = base.units[..256]
                .iter()
                .find(|p| p.tile.unwrap().contains(tile.x, tile.y))
                .unwrap();
            let parent_sup = base.superior[parent.unit_id][0];
            let shift = 448 - 256;
            assert_eq!(t.superior[u.unit_id], vec![parent_sup + shift]);
            assert_eq!(u.signal_dim, 3);
        }
    }

    #[test]
    fn fovea_border_contact() {
        let t = HierarchyTopology::build_foveated(&ModelConfig::default()).unwrap();
        let find = |x: usize, y: usize| {
            t.units.iter().find(|u| u.tile.map(|r| r.contains(x, y)) == Some(true)).unwrap().unit_id
        };
        // 2-pixel tile left of the fovea at pixels (6..8, 8..10); 1-pixel
        // fovea tiles start at x = 8.
        let outer = find(6, 8);
        assert!(t.lateral[outer].contains(&find(8, 8)));
        assert!(t.lateral[outer].contains(&find(8, 9)));
        assert!(t.lateral[outer].contains(&find(8, 10)), "corner contact");
        assert!(!t.lateral[outer].contains(&find(9, 8)));
    }

    #[test]
    fn edge_only_contact_switch() {
        let cfg = ModelConfig { corner_contact: false, ..ModelConfig::default() };
        let t = HierarchyTopology::build_uhr(&cfg).unwrap();
        let interior = 5 * 32 + 5;
        assert_eq!(t.lateral[interior].len(), 4);
    }

    #[test]
    fn uhr_interior_degree() {
        let t = HierarchyTopology::build_uhr(&ModelConfig::default()).unwrap();
        assert_eq!(t.input_level().n_units, 1024);
        assert!(t.units[..1024].iter().all(|u| u.tile.unwrap().area() == 1));
        let interior = t.units[..1024]
            .iter()
            .find(|u| u.tile.unwrap().x == 10 && u.tile.unwrap().y == 7)
            .unwrap()
            .unit_id;
        assert_eq!(t.lateral[interior].len(), 8);
    }

    #[test]
    fn context_of_interior_base_unit() {
        let t = base();
        let id = 5 * 16 + 5;
        assert_eq!(t.lateral[id].len(), 4);
        assert_eq!(t.superior[id].len(), 1);
        assert_eq!(t.context[id].len(), 1 + 4 + 1 + 1);
        assert_eq!(t.context[id][0], id);
        assert_eq!(*t.context[id].last().unwrap(), t.topmost_id);
    }

    #[test]
    fn topmost_listed_once() {
        let t = base();
        let top = t.topmost_id;
        assert_eq!(t.context[top].iter().filter(|&&s| s == top).count(), 1);
        assert_eq!(t.context[top], vec![top]);
    }

    #[test]
    fn non_divisible_fan_in() {
        // 4x4 -> 3x3 blocks are [0,1), [1,2), [2,4).
        assert_eq!(block_range(0, 4, 3), 0..1);
        assert_eq!(block_range(1, 4, 3), 1..2);
        assert_eq!(block_range(2, 4, 3), 2..4);
        let t = base();
        let l2 = &t.levels[2];
        let l3 = &t.levels[3];
        let counts: Vec<usize> = l3.unit_ids().map(|s| t.inferior[s].len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 1, 1, 2, 2, 2, 4]);
        assert!(l2.unit_ids().all(|i| t.superior[i].len() == 1));
    }

    #[test]
    fn config_errors() {
        let bad = |cfg: ModelConfig| HierarchyTopology::build(&cfg).is_err();
        assert!(bad(ModelConfig { view_w: 30, ..ModelConfig::default() }));
        assert!(bad(ModelConfig { level_grids: vec![16, 16, 1], ..ModelConfig::default() }));
        assert!(bad(ModelConfig { level_grids: vec![16, 8], ..ModelConfig::default() }));
        assert!(bad(ModelConfig::default().with_fovea(FoveaMode::Central(17))));
        assert!(bad(ModelConfig { view_w: 16, view_h: 16, ..ModelConfig::default() }
            .with_fovea(FoveaMode::Full)));
    }

    #[test]
    fn rect_touching() {
        let a = Rect { x: 0, y: 0, w: 2, h: 2 };
        assert!(a.touches(&Rect { x: 2, y: 0, w: 1, h: 1 }, false));
        assert!(a.touches(&Rect { x: 2, y: 2, w: 1, h: 1 }, true));
        assert!(!a.touches(&Rect { x: 2, y: 2, w: 1, h: 1 }, false));
        assert!(!a.touches(&Rect { x: 3, y: 0, w: 1, h: 1 }, true));
    }
}
