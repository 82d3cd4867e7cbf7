use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bbox::iou_coords;
use crate::diagnosis::ErrorType;
use crate::error::{HoiError, Result};
use crate::schema::{
    GtFile, GtPairJson, ImageJson, PredictionFile, PredictionJson, VocabularyJson, FORMAT_VERSION,
};

use super::{labels_file, MissedJson, ScenarioSpec, ScenarioTruth};

const GRID: usize = 4;
const CELL: f64 = 250.0;

/// What a ground-truth triplet is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Tp,
    Missed,
    Human,
    Object,
    Association,
    Action,
}

/// Decides, before any geometry, which roles each ground-truth pair carries
/// and which image each pair lands in.
///
/// An action error gets a pair of its own (with only TPs beside it) so the
/// wrong action cannot collide with another error on the same pair. Images
/// holding an association error get at least two pairs.
fn plan(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Vec<Role>>>> {
    let c = &spec.counts;
    let [lo, hi] = spec.pairs_per_image;
    let cap = spec.max_actions_per_pair.min(spec.num_actions);
    let room = spec.images * hi;
    let infeasible = |what: &str| {
        Err(HoiError::InfeasibleScenario(format!(
            "{what} do not fit in {} images of at most {hi} pairs with {cap} actions each",
            spec.images
        )))
    };

    let mut tps = c.clean_tp;
    let mut pairs: Vec<Vec<Role>> = Vec::new();
    if c.action > 0 {
        let action_cap = cap.min(spec.num_actions - 1);
        for _ in 0..c.action {
            let k = rng.gen_range(0..action_cap).min(tps);
            tps -= k;
            let mut roles = vec![Role::Action];
            roles.extend(std::iter::repeat_n(Role::Tp, k));
            pairs.push(roles);
        }
    }
    if pairs.len() > room {
        return infeasible("action errors");
    }
    let mut rest: Vec<Role> = [
        (Role::Tp, tps),
        (Role::Missed, c.missed_gt),
        (Role::Human, c.human_box),
        (Role::Object, c.object_box),
        (Role::Association, c.association),
    ]
    .into_iter()
    .flat_map(|(r, n)| std::iter::repeat_n(r, n))
    .collect();
    rest.shuffle(rng);
    let free = room - pairs.len();
    if rest.len() > free * cap {
        return infeasible("ground-truth triplets");
    }
    let min_size = rest.len().div_ceil(free.max(1)).clamp(1, cap);
    let mut i = 0;
    while i < rest.len() {
        let k = rng.gen_range(min_size..=cap).min(rest.len() - i);
        pairs.push(rest[i..i + k].to_vec());
        i += k;
    }
    let has_assoc = |p: &[Role]| p.contains(&Role::Association);
    if c.association > 0 && pairs.len() == 1 {
        // validation guarantees a second triplet, so this pair has two roles
        let last = pairs[0].pop().unwrap();
        pairs.push(vec![last]);
    }
    pairs.shuffle(rng);

    // pairs per image: random within range, then nudged to the exact total
    let mut n: Vec<usize> = (0..spec.images).map(|_| rng.gen_range(lo..=hi)).collect();
    let mut order: Vec<usize> = (0..spec.images).collect();
    order.shuffle(rng);
    let mut sum: usize = n.iter().sum();
    for &k in order.iter().cycle() {
        if sum == pairs.len() {
            break;
        }
        if sum > pairs.len() && n[k] > 0 {
            n[k] -= 1;
            sum -= 1;
        } else if sum < pairs.len() && n[k] < hi {
            n[k] += 1;
            sum += 1;
        }
    }
    let mut pairs = pairs.into_iter();
    let mut images: Vec<Vec<Vec<Role>>> = n
        .iter()
        .map(|&k| pairs.by_ref().take(k).collect())
        .collect();

    // an association borrows a human from another pair in its image
    for i in 0..images.len() {
        if images[i].len() != 1 || !has_assoc(&images[i][0]) {
            continue;
        }
        if let Some(j) =
            (0..images.len()).find(|&j| j != i && !images[j].is_empty() && images[j].len() < hi)
        {
            let p = images[i].pop().unwrap();
            images[j].push(p);
        } else if let Some((j, q)) = (0..images.len())
            .filter(|&j| j != i && images[j].len() >= 2)
            .find_map(|j| images[j].iter().position(|p| !has_assoc(p)).map(|q| (j, q)))
        {
            let p = images[i].pop().unwrap();
            let other = std::mem::replace(&mut images[j][q], p);
            images[i].push(other);
        } else {
            return infeasible("association errors");
        }
    }
    Ok(images)
}

struct Pair {
    human: [f64; 4],
    object: [f64; 4],
    category: u32,
    actions: Vec<(u32, Role)>,
}

/// A ready prediction with its intended label.
struct Pred {
    json: PredictionJson,
    label: Option<ErrorType>,
    /// Ground-truth boxes a TP was derived from.
    source: Option<([f64; 4], [f64; 4])>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn cell_origin(cell: usize) -> (f64, f64) {
    ((cell % GRID) as f64 * CELL, (cell / GRID) as f64 * CELL)
}

fn rect(x1: f64, y1: f64, w: f64, h: f64) -> [f64; 4] {
    [round2(x1), round2(y1), round2(x1 + w), round2(y1 + h)]
}

/// Shifts each edge by up to `shift` of the box size, retrying until the
/// result still overlaps `b` by more than `min_iou`.
fn jitter(rng: &mut ChaCha8Rng, b: [f64; 4], shift: f64, min_iou: f64) -> [f64; 4] {
    if shift == 0.0 {
        return b;
    }
    let (w, h) = (b[2] - b[0], b[3] - b[1]);
    for _ in 0..64 {
        let mut d = || rng.gen_range(-shift..=shift);
        let c = [
            round2(b[0] + d() * w),
            round2(b[1] + d() * h),
            round2(b[2] + d() * w),
            round2(b[3] + d() * h),
        ];
        if c[2] > c[0] && c[3] > c[1] && iou_coords(c, b).is_ok_and(|v| v > min_iou) {
            return c;
        }
    }
    b
}

/// Same size (capped to fit), random position inside a free cell.
fn relocate(rng: &mut ChaCha8Rng, b: [f64; 4], free: &[usize]) -> [f64; 4] {
    let cell = *free.choose(rng).expect("at least one free cell");
    let (cx, cy) = cell_origin(cell);
    let w = (b[2] - b[0]).min(CELL - 20.0);
    let h = (b[3] - b[1]).min(CELL - 20.0);
    rect(
        cx + rng.gen_range(5.0..=(CELL - 5.0 - w)),
        cy + rng.gen_range(5.0..=(CELL - 5.0 - h)),
        w,
        h,
    )
}

fn scores(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    (
        round4(rng.gen_range(0.5..=1.0)),
        round4(rng.gen_range(0.5..=1.0)),
        round4(rng.gen_range(0.05..=1.0)),
    )
}

fn image_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn image_id(i: usize) -> String {
    format!("img_{i:06}")
}

/// Deterministic for a given spec. Each image draws from its own stream of
/// the seeded generator; duplicates and both-box errors, which span images,
/// come from stream 0 after all images are laid out.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioTruth> {
    spec.validate()?;
    let c = &spec.counts;
    let n_obj = spec.num_objects as u32;
    let n_act = spec.num_actions as u32;
    let mut master = image_rng(spec.seed, 0);
    let layout = plan(spec, &mut master)?;

    let mut images: Vec<ImageJson> = Vec::with_capacity(spec.images);
    let mut preds: Vec<Vec<Pred>> = Vec::with_capacity(spec.images);
    let mut free_cells: Vec<Vec<usize>> = Vec::with_capacity(spec.images);
    let mut missed = Vec::new();

    for (i, roles_per_pair) in layout.into_iter().enumerate() {
        let mut rng = image_rng(spec.seed, i as u64 + 1);
        let mut cells: Vec<usize> = (0..GRID * GRID).collect();
        cells.shuffle(&mut rng);
        let free = cells[roles_per_pair.len()..].to_vec();

        let mut pairs: Vec<Pair> = Vec::with_capacity(roles_per_pair.len());
        for (roles, &cell) in roles_per_pair.into_iter().zip(&cells) {
            let actions = sample(&mut rng, spec.num_actions, roles.len());
            let mut actions: Vec<(u32, Role)> =
                actions.iter().map(|a| a as u32 + 1).zip(roles).collect();
            actions.sort_by_key(|a| a.0);

            let (cx, cy) = cell_origin(cell);
            let human = rect(
                cx + rng.gen_range(5.0..25.0),
                cy + rng.gen_range(5.0..30.0),
                rng.gen_range(60.0..100.0),
                rng.gen_range(120.0..200.0),
            );
            let object = rect(
                cx + rng.gen_range(135.0..150.0),
                cy + rng.gen_range(5.0..100.0),
                rng.gen_range(50.0..95.0),
                rng.gen_range(40.0..140.0),
            );
            pairs.push(Pair {
                human,
                object,
                category: rng.gen_range(1..=n_obj),
                actions,
            });
        }

        let shift = spec.jitter.tp_shift;
        let mut out: Vec<Pred> = Vec::new();
        for (j, pair) in pairs.iter().enumerate() {
            for &(action, role) in &pair.actions {
                let (sh, so, sa) = scores(&mut rng);
                let mut p = PredictionJson {
                    image_id: image_id(i),
                    human_box: pair.human,
                    human_score: sh,
                    human_category: None,
                    object_box: pair.object,
                    object_category: pair.category,
                    object_score: so,
                    action,
                    action_score: sa,
                    confidence: None,
                };
                let label = match role {
                    Role::Missed => {
                        missed.push(MissedJson {
                            image_id: image_id(i),
                            pair: j as u32,
                            action,
                        });
                        continue;
                    }
                    Role::Tp => {
                        p.human_box = jitter(&mut rng, pair.human, shift, 0.5);
                        p.object_box = jitter(&mut rng, pair.object, shift, 0.5);
                        None
                    }
                    Role::Human => {
                        p.object_box = jitter(&mut rng, pair.object, shift, 0.5);
                        if rng.gen_bool(spec.jitter.label_swap_rate) {
                            p.human_box = jitter(&mut rng, pair.human, shift, 0.5);
                            p.human_category = Some(rng.gen_range(1..=n_obj));
                        } else {
                            p.human_box = relocate(&mut rng, pair.human, &free);
                        }
                        Some(ErrorType::HumanBox)
                    }
                    Role::Object => {
                        p.human_box = jitter(&mut rng, pair.human, shift, 0.5);
                        if n_obj >= 2 && rng.gen_bool(spec.jitter.label_swap_rate) {
                            p.object_box = jitter(&mut rng, pair.object, shift, 0.5);
                            let other = rng.gen_range(1..n_obj);
                            p.object_category = if other >= pair.category {
                                other + 1
                            } else {
                                other
                            };
                        } else {
                            p.object_box = relocate(&mut rng, pair.object, &free);
                        }
                        Some(ErrorType::ObjectBox)
                    }
                    Role::Association => {
                        let mut a = rng.gen_range(0..pairs.len() - 1);
                        if a >= j {
                            a += 1;
                        }
                        p.human_box = jitter(&mut rng, pairs[a].human, shift, 0.5);
                        p.object_box = jitter(&mut rng, pair.object, shift, 0.5);
                        Some(ErrorType::Association)
                    }
                    Role::Action => {
                        p.human_box = jitter(&mut rng, pair.human, shift, 0.5);
                        p.object_box = jitter(&mut rng, pair.object, shift, 0.5);
                        let wrong: Vec<u32> = (1..=n_act)
                            .filter(|a| pair.actions.iter().all(|x| x.0 != *a))
                            .collect();
                        p.action = *wrong.choose(&mut rng).expect("a wrong action remains");
                        Some(ErrorType::Action)
                    }
                };
                out.push(Pred {
                    json: p,
                    label,
                    source: (role == Role::Tp).then_some((pair.human, pair.object)),
                });
            }
        }

        images.push(ImageJson {
            id: image_id(i),
            gt_pairs: pairs
                .into_iter()
                .map(|p| GtPairJson {
                    human_box: p.human,
                    object_box: p.object,
                    object_category: p.category,
                    actions: p.actions.into_iter().map(|a| a.0).collect(),
                })
                .collect(),
        });
        preds.push(out);
        free_cells.push(free);
    }

    let mut rng = master;

    // duplicates: lower-scored near copies of clean TPs
    let tps: Vec<(usize, usize)> = preds
        .iter()
        .enumerate()
        .flat_map(|(i, v)| {
            v.iter()
                .enumerate()
                .filter(|(_, p)| p.label.is_none())
                .map(move |(k, _)| (i, k))
        })
        .collect();
    let mut chosen: Vec<usize> = sample(&mut rng, tps.len(), c.duplicate).into_vec();
    chosen.sort_unstable();
    for t in chosen {
        let (i, k) = tps[t];
        let twin = &preds[i][k];
        let (gh, go) = twin.source.unwrap();
        let mut p = twin.json.clone();
        p.human_box = jitter_near(
            &mut rng,
            twin.json.human_box,
            gh,
            spec.jitter.tp_shift / 2.0,
        );
        p.object_box = jitter_near(
            &mut rng,
            twin.json.object_box,
            go,
            spec.jitter.tp_shift / 2.0,
        );
        let mut sa = round4(p.action_score * rng.gen_range(0.3..0.9));
        while sa >= p.action_score && sa > 0.0 {
            sa = round4(sa - 0.0001);
        }
        p.action_score = sa;
        preds[i].push(Pred {
            json: p,
            label: Some(ErrorType::Duplicate),
            source: None,
        });
    }

    // both-box errors: junk in free space, in categories that have ground truth
    let gt_categories: Vec<(u32, u32)> = images
        .iter()
        .flat_map(|im| {
            im.gt_pairs
                .iter()
                .flat_map(|p| p.actions.iter().map(move |a| (p.object_category, *a)))
        })
        .collect();
    for _ in 0..c.both_boxes {
        let i = rng.gen_range(0..spec.images);
        let (obj, action) = *gt_categories.choose(&mut rng).expect("ground truth exists");
        let (sh, so, sa) = scores(&mut rng);
        let size = |rng: &mut ChaCha8Rng| {
            rect(
                0.0,
                0.0,
                rng.gen_range(50.0..120.0),
                rng.gen_range(50.0..200.0),
            )
        };
        let (hb, ob) = (size(&mut rng), size(&mut rng));
        let human_box = relocate(&mut rng, hb, &free_cells[i]);
        let object_box = relocate(&mut rng, ob, &free_cells[i]);
        preds[i].push(Pred {
            json: PredictionJson {
                image_id: image_id(i),
                human_box,
                human_score: sh,
                human_category: None,
                object_box,
                object_category: obj,
                object_score: so,
                action,
                action_score: sa,
                confidence: None,
            },
            label: Some(ErrorType::BothBoxes),
            source: None,
        });
    }

    check_violations(&images, &preds)?;

    let vocabulary = VocabularyJson {
        objects: std::iter::once("person".to_string())
            .chain((1..=n_obj).map(|o| format!("object_{o}")))
            .collect(),
        actions: std::iter::once("no_interaction".to_string())
            .chain((1..=n_act).map(|a| format!("action_{a}")))
            .collect(),
        valid_hoi: (1..=n_obj)
            .flat_map(|o| (0..=n_act).map(move |a| [o, a]))
            .collect(),
        excluded_actions: vec![0],
        person_category: Some(0),
    };
    let gt = GtFile {
        format_version: FORMAT_VERSION,
        vocabulary,
        images,
    };
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for p in preds.into_iter().flatten() {
        labels.push(p.label);
        predictions.push(p.json);
    }
    let pf = PredictionFile {
        format_version: FORMAT_VERSION,
        score_threshold: None,
        predictions,
    };
    ScenarioTruth::from_parts(&gt, &pf, &labels_file(spec.seed, &labels, missed))
}

/// Near copy of `twin` that still overlaps the ground-truth box `gt`.
fn jitter_near(rng: &mut ChaCha8Rng, twin: [f64; 4], gt: [f64; 4], shift: f64) -> [f64; 4] {
    for _ in 0..64 {
        let c = jitter(rng, twin, shift, 0.5);
        if iou_coords(c, gt).is_ok_and(|v| v > 0.5) {
            return c;
        }
    }
    twin
}

/// Boxes meant to be wrong must not overlap any ground-truth box of their
/// role above 0.5, unless the label was swapped instead.
fn check_violations(images: &[ImageJson], preds: &[Vec<Pred>]) -> Result<()> {
    for (img, list) in images.iter().zip(preds) {
        for p in list {
            let humans_bad = p.json.human_category.is_some()
                || img
                    .gt_pairs
                    .iter()
                    .all(|g| iou_coords(p.json.human_box, g.human_box).is_ok_and(|v| v <= 0.5));
            let objects_bad = img.gt_pairs.iter().all(|g| {
                g.object_category != p.json.object_category
                    || iou_coords(p.json.object_box, g.object_box).is_ok_and(|v| v <= 0.5)
            });
            let ok = match p.label {
                Some(ErrorType::HumanBox) => humans_bad && !objects_bad,
                Some(ErrorType::ObjectBox) => objects_bad && !humans_bad,
                Some(ErrorType::BothBoxes) => humans_bad && objects_bad,
                _ => true,
            };
            if !ok {
                return Err(HoiError::Computation {
                    stage: "synth",
                    message: format!("{} violation check failed on {}", p.label.unwrap(), img.id),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::InjectionCounts;

    fn spec(counts: InjectionCounts) -> ScenarioSpec {
        ScenarioSpec {
            seed: 7,
            images: 40,
            counts,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = spec(InjectionCounts {
            clean_tp: 60,
            duplicate: 10,
            association: 10,
            both_boxes: 5,
            ..Default::default()
        });
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.files(), b.files());
        let mut other = s.clone();
        other.seed = 8;
        assert_ne!(generate(&other).unwrap().files()[1], a.files()[1]);
    }

    #[test]
    fn counts_match_request() {
        let counts = InjectionCounts {
            clean_tp: 80,
            human_box: 7,
            object_box: 6,
            both_boxes: 5,
            association: 4,
            duplicate: 3,
            action: 9,
            missed_gt: 8,
        };
        let t = generate(&spec(counts.clone())).unwrap();
        for e in ErrorType::ALL {
            assert_eq!(t.intended_count(e), counts.get(e), "{e}");
        }
        assert_eq!(t.labels.iter().filter(|l| l.is_none()).count(), 80);
        assert_eq!(t.dataset.num_gt_triplets(), 80 + 7 + 6 + 4 + 9 + 8);
    }

    #[test]
    fn infeasible_specs() {
        let bad = spec(InjectionCounts {
            duplicate: 3,
            clean_tp: 2,
            ..Default::default()
        });
        assert!(matches!(
            generate(&bad),
            Err(HoiError::InfeasibleScenario(_))
        ));
        let mut lonely = spec(InjectionCounts {
            association: 1,
            ..Default::default()
        });
        lonely.pairs_per_image = [1, 1];
        assert!(generate(&lonely).is_err());
        let crowded = ScenarioSpec {
            images: 1,
            pairs_per_image: [1, 2],
            max_actions_per_pair: 1,
            counts: InjectionCounts {
                clean_tp: 5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            generate(&crowded),
            Err(HoiError::InfeasibleScenario(_))
        ));
    }

    #[test]
    fn round_trips_through_files() {
        let t = generate(&spec(InjectionCounts {
            clean_tp: 30,
            missed_gt: 4,
            ..Default::default()
        }))
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.write_dir(dir.path()).unwrap();
        let back = ScenarioTruth::load_dir(dir.path()).unwrap();
        assert_eq!(back.files(), t.files());
        assert_eq!(back.labels, t.labels);
        assert_eq!(back.missed, t.missed);
        assert_eq!(back.predictions.fingerprint(), t.predictions.fingerprint());
    }
}
