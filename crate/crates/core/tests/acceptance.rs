//! Acceptance suite. Runs without the test harness so every criterion prints
//! one PASS/FAIL line; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use leafdx_core::classifier::{backprop_gradients, evaluate, save_model, train, DiseaseClass, MlpModel, TrainingConfig};
use leafdx_core::features::{eccentricity, equivalent_diameter, extract_features, AxisPair, FeatureVector};
use leafdx_core::iconquery::{lint, KnowledgeBase, Taxonomy, DEFAULT_LOCALE, ROOT_ID};
use leafdx_core::pipeline::{load_corpus, run_pipeline, AnalysisConfig, PipelineError, Stage};
use leafdx_core::pnm::encode_ppm;
use leafdx_core::segmentation::{label_components, otsu, Connectivity, Histogram, Spot};
use leafdx_core::synth::{blank_leaf, generate_corpus, generate_sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn(&mut Shared) -> Check,
}

/// Work reused across criteria.
#[derive(Default)]
struct Shared {
    corpus_dir: Option<tempfile::TempDir>,
    model_bytes: Option<Vec<u8>>,
    model: Option<MlpModel<f64>>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn seed42_accuracy(s: &mut Shared) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_corpus(25, 20, 42, dir.path()).map_err(|e| e.to_string())?;
    let data = load_corpus::<f64>(dir.path(), &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let model = train(&data.train, &TrainingConfig::default()).map_err(|e| e.to_string())?;
    let (report, _) = evaluate(&model, &data.test).map_err(|e| e.to_string())?;
    let acc = 100.0 * report.image_accuracy();
    s.model_bytes = Some(save_model(&model));
    s.model = Some(model);
    s.corpus_dir = Some(dir);
    ensure(acc >= 90.0, || format!("image accuracy {acc:.2}% < 90%"))?;
    Ok(format!(
        "image accuracy {acc:.2}% ({}/{}), spot accuracy {:.2}%",
        report.correct_images,
        report.images,
        100.0 * report.spot_accuracy()
    ))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn feature_mismatch(f: &FeatureVector<f64>, e: &common::Expected) -> Option<String> {
    let checks = [
        ("area", f.area == e.area),
        ("major_axis_length", close(f.major_axis_length, e.major)),
        ("minor_axis_length", close(f.minor_axis_length, e.minor)),
        ("bounding_box_area", close(f.bounding_box_area, e.bbox_area)),
        ("eccentricity", close(f.eccentricity, e.eccentricity)),
        ("perimeter", close(f.perimeter, e.perimeter)),
        ("solidity", close(f.solidity, e.solidity)),
        ("euler_number", f.euler_number == e.euler),
        ("orientation", common::angle_gap(f.orientation, e.orientation) <= 1e-9),
        ("extent", close(f.extent, e.extent)),
        ("equivalent_diameter", close(f.equivalent_diameter, e.diameter)),
        ("hull_vertex_count", f.hull_vertex_count == e.hull_vertices),
    ];
    checks.iter().find(|(_, ok)| !ok).map(|(name, _)| format!("{name}: got {f:?}, expected {e:?}"))
}

fn feature_oracles(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfea7);
    let mut holes = 0;
    for i in 0..50 {
        let spot = common::random_spot(&mut rng, 16);
        let e = common::expected_features(spot.pixels());
        holes += (e.euler < 1) as usize;
        if let Some(msg) = feature_mismatch(&extract_features::<f64>(&spot), &e) {
            return Err(format!("mask {i}: {msg}"));
        }
    }
    Ok(format!("50 masks, all 12 fields agree ({holes} with holes)"))
}

fn labeling(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1abe1);
    let mut regions = 0;
    for i in 0..200 {
        let (w, h) = (rng.random_range(1..=48), rng.random_range(1..=48));
        let density = rng.random_range(0.05..0.9);
        let g = common::random_grid(&mut rng, w, h, density);
        let mask = common::grid_to_mask(&g);
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let lr = label_components(&mask, conn);
            let comps = common::flood_components(&g, eight);
            ensure(lr.region_count() == comps.len(), || {
                format!("mask {i} {conn:?}: {} regions, flood fill found {}", lr.region_count(), comps.len())
            })?;
            // each flood-fill component carries exactly one label, and labels are not shared
            let mut owner = BTreeMap::new();
            for (ci, comp) in comps.iter().enumerate() {
                let l = lr.labels.get(comp[0].0 as usize, comp[0].1 as usize);
                ensure(l != 0 && comp.iter().all(|&(x, y)| lr.labels.get(x as usize, y as usize) == l), || {
                    format!("mask {i} {conn:?}: component {ci} is split or unlabeled")
                })?;
                ensure(owner.insert(l, ci).is_none(), || format!("mask {i} {conn:?}: label {l} reused"))?;
            }
            let labeled = lr.labels.as_slice().iter().filter(|&&l| l != 0).count();
            let fg: usize = comps.iter().map(Vec::len).sum();
            ensure(labeled == fg, || format!("mask {i} {conn:?}: {labeled} labeled pixels, {fg} foreground"))?;
            regions += comps.len();
        }
    }
    Ok(format!("200 masks x 2 connectivities, {regions} regions"))
}

fn random_histogram<R: Rng>(rng: &mut R) -> Vec<u64> {
    let levels = rng.random_range(2..=256);
    let mut counts = vec![0u64; levels];
    match rng.random_range(0..3) {
        // sparse noise
        0 => counts.iter_mut().for_each(|c| *c = if rng.random_bool(0.3) { rng.random_range(0..50) } else { 0 }),
        // two separated clusters, so every cut in the gap ties
        1 => {
            for _ in 0..2 {
                let center = rng.random_range(0..levels);
                let spread = rng.random_range(0..=levels / 16);
                for c in &mut counts[center.saturating_sub(spread)..=(center + spread).min(levels - 1)] {
                    *c += rng.random_range(1..40);
                }
            }
        }
        // dense
        _ => counts.iter_mut().for_each(|c| *c = rng.random_range(0..40)),
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        counts[0] += 1;
        counts[levels - 1] += 1;
    }
    counts
}

fn otsu_optimality(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0750);
    let mut ties = 0;
    for i in 0..100 {
        let counts = random_histogram(&mut rng);
        let levels = counts.len();
        let h = Histogram::from_counts(counts.clone(), 0.0, 1.0).map_err(|e| e.to_string())?;
        let cut = otsu(&h).map_err(|e| format!("histogram {i}: {e}"))?;
        let expected = common::otsu_best_cut(&counts).unwrap();
        ensure(cut.cut == expected, || format!("histogram {i}: cut {} but exhaustive scan says {expected}", cut.cut))?;
        ensure(close(cut.threshold, expected as f64 / levels as f64), || format!("histogram {i}: threshold {}", cut.threshold))?;
        let vars = common::otsu_variances(&counts);
        let best = (1..levels).filter(|&t| vars[t].is_some()).map(|t| common::otsu_variance_f64(&counts, t)).fold(0.0, f64::max);
        let got = common::otsu_variance_f64(&counts, cut.cut);
        ensure(got >= best * (1.0 - 1e-12), || format!("histogram {i}: variance {got} below maximum {best}"))?;
        let (n, d) = vars[expected].unwrap();
        ties += vars.iter().flatten().filter(|&&(vn, vd)| vn * d == n * vd).count().saturating_sub(1).min(1);
    }
    Ok(format!("100 histograms, {ties} with tied maxima resolved to the lowest cut"))
}

fn gradient_check(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d);
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for net in 0..10 {
        let (d, h1, h2) = (rng.random_range(2..=12), rng.random_range(2..=16), rng.random_range(2..=8));
        let mut m = MlpModel::<f64>::random(d, h1, h2, &mut rng);
        for layer in m.layers_mut() {
            layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        for sample in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target = if rng.random_bool(0.5) { DiseaseClass::LeafBlast } else { DiseaseClass::BrownSpot };
            let (g, _) = backprop_gradients(&m, &x, target).map_err(|e| e.to_string())?;
            let analytic: Vec<f64> = g.weights.iter().zip(&g.biases).flat_map(|(w, b)| w.iter().chain(b)).copied().collect();
            let numeric = common::numeric_gradient(&m, &x, target, 1e-5);
            for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let r = common::relative_error(*a, *n);
                ensure(r < 1e-4, || format!("net {net} sample {sample} param {k}: analytic {a} numeric {n} (rel {r:.2e})"))?;
                worst = worst.max(r);
            }
            params += analytic.len();
        }
    }
    Ok(format!("100 cases, {params} partials, worst relative error {worst:.2e}"))
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(s: &mut Shared) -> Check {
    let (Some(dir), Some(first)) = (&s.corpus_dir, &s.model_bytes) else {
        return Err("needs the seed-42 corpus and model".into());
    };
    let data = load_corpus::<f64>(dir.path(), &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let again = save_model(&train(&data.train, &TrainingConfig::default()).map_err(|e| e.to_string())?);
    ensure(&again == first, || "retrained model bytes differ".into())?;

    let other = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_corpus(25, 20, 42, other.path()).map_err(|e| e.to_string())?;
    let (a, b) = (files_under(dir.path()), files_under(other.path()));
    ensure(a == b, || "regenerated corpus differs".into())?;
    Ok(format!("model {} bytes identical; corpus {} files identical", first.len(), a.len()))
}

fn stage_order(s: &mut Shared) -> Check {
    let model = s.model.clone().unwrap_or_else(|| MlpModel::zeros(12, 16, 8));
    let cfg = AnalysisConfig::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a6e);
    let mut inputs: Vec<(String, Vec<u8>)> = vec![];
    for seed in 0..4 {
        for class in DiseaseClass::ALL {
            inputs.push((format!("{class} seed {seed}"), generate_sample(class, seed).unwrap().image.to_ppm()));
        }
    }
    inputs.push(("blank leaf".into(), blank_leaf(9).to_ppm()));
    inputs.push(("uniform gray".into(), encode_ppm(64, 64, &[128; 64 * 64 * 3])));
    inputs.push(("single pixel".into(), encode_ppm(1, 1, &[200, 40, 10])));
    for k in 0..4 {
        let (w, h) = (rng.random_range(1..300), rng.random_range(1..300));
        let bytes: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
        inputs.push((format!("noise {k} ({w}x{h})"), encode_ppm(w, h, &bytes)));
    }
    let (mut diagnosed, mut undiagnosable) = (0, 0);
    for (name, bytes) in &inputs {
        let timings = match run_pipeline(bytes, name, &cfg, &model) {
            Ok(out) => {
                diagnosed += 1;
                out.timings
            }
            Err(PipelineError::Undiagnosable { timings }) => {
                undiagnosable += 1;
                timings
            }
            Err(e) => return Err(format!("{name}: {e}")),
        };
        ensure(timings.stages() == Stage::ALL, || format!("{name}: stages {:?}", timings.stages()))?;
    }
    Ok(format!("{} inputs ({diagnosed} diagnosed, {undiagnosable} undiagnosable), all list 11 stages in order", inputs.len()))
}

fn table_ratios(_: &mut Shared) -> Check {
    let axes = |major: f64, minor: f64| AxisPair {
        major_p1: (0, 0),
        major_p2: (0, 0),
        major_length: major,
        minor_length: minor,
        orientation: 0.0,
    };
    let brown = eccentricity(&axes(6.96, 3.86));
    let blast = eccentricity(&axes(3.44, 1.69));
    let row = Spot::from_pixels(1, (0..19).map(|x| (x, 0)).collect()).unwrap();
    let diam = equivalent_diameter(&row);
    ensure((brown - 0.5546).abs() <= 5e-4, || format!("eccentricity(6.96, 3.86) = {brown}"))?;
    ensure((blast - 0.4913).abs() <= 5e-4, || format!("eccentricity(3.44, 1.69) = {blast}"))?;
    ensure((diam - 4.9186).abs() <= 1e-3, || format!("diameter(19) = {diam}"))?;
    Ok(format!("{brown:.4}, {blast:.4}, {diam:.4}"))
}

fn taxonomy_lint(_: &mut Shared) -> Check {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let tax = Taxonomy::load(&data.join("taxonomy.json")).map_err(|e| e.to_string())?;
    let kb = KnowledgeBase::load(&data.join("kb.json")).map_err(|e| e.to_string())?;
    let problems = lint(&tax, &kb);
    ensure(problems.is_empty(), || format!("lint: {problems:?}"))?;

    // depth of every node by walking down from the virtual root
    let mut depth = BTreeMap::new();
    let mut frontier = vec![(ROOT_ID.to_string(), 0usize)];
    while let Some((id, d)) = frontier.pop() {
        for child in tax.children(&id).map_err(|e| e.to_string())? {
            depth.insert(child.id.clone(), d + 1);
            frontier.push((child.id.clone(), d + 1));
        }
    }
    let mut leaves = 0;
    for leaf in tax.leaves() {
        // selections a user makes: one tap per level, always choosing the child on the leaf's path
        let path = tax.path_to(&leaf.id).map_err(|e| e.to_string())?;
        let mut taps = 0;
        let mut at = ROOT_ID.to_string();
        for step in &path.node_ids {
            let offered = tax.children(&at).map_err(|e| e.to_string())?;
            ensure(offered.iter().any(|n| &n.id == step), || format!("{step} not offered under {at}"))?;
            at = step.clone();
            taps += 1;
        }
        let q = tax.build_query(&path).map_err(|e| e.to_string())?;
        let r = kb.retrieve(&q, DEFAULT_LOCALE).map_err(|e| e.to_string())?;
        ensure(Some(&r.entry_id) == leaf.entry.as_ref(), || format!("{} retrieved {}", leaf.id, r.entry_id))?;
        ensure(Some(&taps) == depth.get(&leaf.id), || format!("{}: {taps} taps, depth {:?}", leaf.id, depth.get(&leaf.id)))?;
        leaves += 1;
    }
    ensure(leaves > 0, || "no leaves".into())?;
    Ok(format!("{} nodes, {leaves} leaves, each reached in depth-many selections", tax.len()))
}

const CRITERIA: [Criterion; 9] = [
    Criterion { name: "seed-42 corpus image accuracy >= 90%", budget: Some(Duration::from_secs(120)), run: seed42_accuracy },
    Criterion { name: "feature oracles on 50 random masks", budget: Some(Duration::from_secs(10)), run: feature_oracles },
    Criterion { name: "labeling matches flood fill on 200 masks", budget: Some(Duration::from_secs(5)), run: labeling },
    Criterion { name: "Otsu cut is the exhaustive optimum", budget: Some(Duration::from_secs(2)), run: otsu_optimality },
    Criterion { name: "backprop matches central differences", budget: Some(Duration::from_secs(5)), run: gradient_check },
    Criterion { name: "training and corpus generation are deterministic", budget: None, run: determinism },
    Criterion { name: "pipeline records every stage in order", budget: None, run: stage_order },
    Criterion { name: "table ratio spot checks", budget: None, run: table_ratios },
    Criterion { name: "taxonomy lint on shipped data", budget: None, run: taxonomy_lint },
];

fn main() {
    let mut shared = Shared::default();
    let mut failed = 0;
    for c in &CRITERIA {
        let start = Instant::now();
        let result = (c.run)(&mut shared);
        let took = start.elapsed();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {:.2}s, budget {:.0}s", took.as_secs_f64(), b.as_secs_f64())),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  {}: {detail} [{:.2}s]", c.name, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}: {why} [{:.2}s]", c.name, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
