use proptest::prelude::*;
use pvm_core::topology::context_layout;
use pvm_core::{FoveaMode, HierarchyTopology, ModelConfig};

fn config_strategy() -> impl Strategy<Value = ModelConfig> {
    (1usize..=8, 1usize..=3, 1usize..=3, any::<u8>(), 0u8..3, any::<bool>(), 0usize..=8)
        .prop_map(|(g0, tw, th, mask, fovea, corners, k)| {
            // strictly decreasing grids from g0 down to 1, picking a subset of the middle
            let mut grids = vec![g0];
            for g in (2..g0).rev() {
                if mask & (1 << (g % 8)) != 0 {
                    grids.push(g);
                }
            }
            if g0 > 1 {
                grids.push(1);
            }
            let fovea = match fovea {
                _ if g0 == 1 => FoveaMode::None,
                0 => FoveaMode::None,
                1 => FoveaMode::Central(k.min(g0)),
                _ => FoveaMode::Full,
            };
            let even = fovea != FoveaMode::None;
            let (tw, th) = if even { (tw * 2, th * 2) } else { (tw, th) };
            ModelConfig {
                view_w: g0 * tw,
                view_h: g0 * th,
                level_grids: grids,
                fovea,
                hidden_dim: 3,
                corner_contact: corners,
            }
        })
}

fn tiles(t: &HierarchyTopology) -> Vec<pvm_core::Rect> {
    t.input_level().unit_ids().map(|id| t.units[id].tile.unwrap()).collect()
}

// Pixel-level oracle: two tiles are neighbours when some pixel of one is
// 8-adjacent (or 4-adjacent without corners) to some pixel of the other.
fn pixel_adjacent(t: &HierarchyTopology, corners: bool) -> Vec<Vec<usize>> {
    let (w, h) = (t.config.view_w, t.config.view_h);
    let ts = tiles(t);
    let mut owner = vec![usize::MAX; w * h];
    for (id, r) in ts.iter().enumerate() {
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                owner[y * w + x] = id;
            }
        }
    }
    let mut adj = vec![std::collections::BTreeSet::new(); ts.len()];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if (dx, dy) == (0, 0) || (!corners && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let a = owner[(y * w as i64 + x) as usize];
                    let b = owner[(ny * w as i64 + nx) as usize];
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
    }
    adj.into_iter().map(|s| s.into_iter().collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn structural_invariants(cfg in config_strategy()) {
        let t = HierarchyTopology::build(&cfg).unwrap();

        // every pixel covered exactly once
        let mut cover = vec![0u32; cfg.view_w * cfg.view_h];
        for r in tiles(&t) {
            for y in r.y..r.bottom() {
                for x in r.x..r.right() {
                    cover[y * cfg.view_w + x] += 1;
                }
            }
        }
        prop_assert!(cover.iter().all(|&c| c == 1));

        for id in 0..t.n_units() {
            prop_assert!(!t.lateral[id].contains(&id));
            for &j in &t.lateral[id] {
                prop_assert!(t.lateral[j].contains(&id));
                prop_assert_eq!(t.level_of(j), t.level_of(id));
            }
            for &s in &t.superior[id] {
                prop_assert_eq!(t.level_of(s), t.level_of(id) + 1);
                prop_assert!(t.inferior[s].contains(&id));
            }
            let top = t.levels.len() - 1;
            prop_assert_eq!(t.superior[id].is_empty(), t.level_of(id) == top);
            if t.level_of(id) > 0 {
                prop_assert!(!t.inferior[id].is_empty());
                prop_assert_eq!(t.units[id].signal_dim, t.inferior[id].len() * cfg.hidden_dim);
            }
            prop_assert_eq!(&t.context[id], &context_layout(&t, id));
            prop_assert_eq!(t.units[id].context_dim, t.context[id].len() * cfg.hidden_dim);
        }

        // input pixels are conserved in the summed input signal
        let input_signal: usize = t.input_level().unit_ids().map(|id| t.units[id].signal_dim).sum();
        prop_assert_eq!(input_signal, cfg.view_w * cfg.view_h * 3);

        // every input unit's pixels end up under exactly one topmost ancestor chain
        for id in t.input_level().unit_ids() {
            let mut cur = id;
            while let Some(&s) = t.superior[cur].first() {
                prop_assert_eq!(t.superior[cur].len(), 1);
                cur = s;
            }
            prop_assert_eq!(cur, t.topmost_id);
        }
    }

    #[test]
    fn subdivided_input_lateral_matches_pixel_oracle(cfg in config_strategy()) {
        prop_assume!(cfg.fovea != FoveaMode::None && cfg.fovea != FoveaMode::Central(0));
        let t = HierarchyTopology::build(&cfg).unwrap();
        let oracle = pixel_adjacent(&t, cfg.corner_contact);
        for id in t.input_level().unit_ids() {
            prop_assert_eq!(&t.lateral[id], &oracle[id]);
        }
    }
}

#[test]
fn reference_unit_counts() {
    let cfg = ModelConfig::default();
    let base = HierarchyTopology::build_uniform(&cfg).unwrap();
    let fov = HierarchyTopology::build_foveated(&cfg).unwrap();
    let uhr = HierarchyTopology::build_uhr(&cfg).unwrap();
    assert_eq!(base.input_level().n_units, 256);
    assert_eq!(fov.input_level().n_units, 448);
    assert_eq!(uhr.input_level().n_units, 1024);
    for t in [&base, &fov, &uhr] {
        let upper: Vec<usize> = t.levels[1..].iter().map(|l| l.n_units).collect();
        assert_eq!(upper, vec![64, 16, 9, 4, 1]);
    }
}

#[test]
fn base_input_lateral_is_four_neighbour() {
    let t = HierarchyTopology::build_uniform(&ModelConfig::default()).unwrap();
    let oracle = pixel_adjacent(&t, false);
    for id in t.input_level().unit_ids() {
        assert_eq!(t.lateral[id], oracle[id]);
    }
    // interior unit: self, 4 laterals, 1 superior, topmost
    let interior = 5 * 16 + 5;
    assert_eq!(t.context[interior].len(), 7);
}

#[test]
fn uhr_matches_pixel_eight_adjacency() {
    let t = HierarchyTopology::build_uhr(&ModelConfig::default()).unwrap();
    let oracle = pixel_adjacent(&t, true);
    for id in t.input_level().unit_ids() {
        assert_eq!(t.lateral[id], oracle[id]);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        ModelConfig { level_grids: vec![16, 16, 1], ..ModelConfig::default() },
        ModelConfig { level_grids: vec![16, 8], ..ModelConfig::default() },
        ModelConfig { view_w: 30, ..ModelConfig::default() },
        ModelConfig::default().with_fovea(FoveaMode::Central(17)),
        ModelConfig { view_w: 16, view_h: 16, ..ModelConfig::default() }.with_fovea(FoveaMode::Full),
        ModelConfig { hidden_dim: 0, ..ModelConfig::default() },
        ModelConfig { view_w: 2, view_h: 2, level_grids: vec![1], ..ModelConfig::default() }.with_fovea(FoveaMode::Full),
    ];
    for cfg in bad {
        assert!(HierarchyTopology::build(&cfg).is_err(), "{cfg:?}");
    }
}
