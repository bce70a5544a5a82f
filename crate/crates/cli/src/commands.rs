use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use auctionkit::mechanisms::{
    audit_truthfulness, AuditReport, CppMechanism, DictatorMechanism, GreedyMechanism, Instance,
    MechanismHandle, MidrMultiUnit, MultiUnitMechanism, UniformSplitMechanism, VcgMechanism,
};
use auctionkit::menus::{
    enumerate_structured_submenu, menu_oracle, probe_candidate, MenuError, MenuPrice,
    SubmenuParams,
};
use auctionkit::props::{run_structural_suite, SuiteCase, SuiteConfig};
use auctionkit::rational::{rat_from_str, rat_to_string};
use auctionkit::reductions::ca::{run_reduction_ca, verify_claim25, CAReductionConfig};
use auctionkit::reductions::cover::{
    cpp_decision, stamp_certified, CoverKind, CppReport, CPPConfig, RegularCoverInstance,
};
use auctionkit::reductions::mua::{lemma52_check, mua_extract};
use auctionkit::reductions::tie::{run_tie_extraction, TieAdvice, TieConfig};
use auctionkit::reductions::Verdict;
use auctionkit::satkit::{parse_dimacs, Formula};
use auctionkit::valuations::{ValuationSpec, ValuationHandle};
use auctionkit::{Bundle, Rat};

use crate::plot;
use crate::{
    AuditArgs, Claim25Args, MenuArgs, PropsArgs, ReduceCaArgs, ReduceCppArgs, ReduceMuaArgs,
    ReduceTieArgs, SuiteKind,
};

pub struct Ctx {
    pub master: Option<u64>,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl Ctx {
    /// Master seed when set, the given fallback otherwise.
    fn seed(&self, fallback: u64) -> u64 {
        self.master.unwrap_or(fallback)
    }

    fn emit<T: Serialize>(&self, report: &T) -> Result<()> {
        let json = serde_json::to_string_pretty(report).context("serializing report")?;
        match &self.out {
            Some(path) => fs::write(path, format!("{json}\n"))
                .with_context(|| format!("writing {}", path.display()))?,
            None => println!("{json}"),
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `(master, lane, index)`; hands every
/// fanned-out unit an order-independent seed.
fn subseed(master: u64, lane: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(lane.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` over the items on up to `workers` threads. Seeds must be
/// fixed before the call; results return in input order, so the
/// output is pool-size independent.
fn fan_out<T, R>(
    items: Vec<T>,
    workers: usize,
    f: impl Fn(usize, T) -> Result<R> + Sync,
) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
{
    let n = items.len();
    if workers <= 1 || n <= 1 {
        return items.into_iter().enumerate().map(|(i, item)| f(i, item)).collect();
    }
    let queue = Mutex::new(items.into_iter().enumerate().collect::<VecDeque<_>>());
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    let failure: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                if failure.lock().unwrap().is_some() {
                    break;
                }
                let Some((i, item)) = queue.lock().unwrap().pop_front() else { break };
                match f(i, item) {
                    Ok(r) => results.lock().unwrap()[i] = Some(r),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every index was either filled or failed"))
        .collect())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_formula(path: &Path) -> Result<Formula> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_rat(s: &str, what: &str) -> Result<Rat> {
    rat_from_str(s).with_context(|| format!("parsing {what} {s:?}"))
}

pub fn parse_mechanism(name: &str) -> Result<MechanismHandle> {
    if let Some(rest) = name.strip_prefix("dictator:") {
        let to: usize =
            rest.parse().with_context(|| format!("bidder index in {name:?}"))?;
        return Ok(Arc::new(DictatorMechanism { to }));
    }
    if let Some(rest) = name.strip_prefix("cpp:") {
        let k: usize = rest.parse().with_context(|| format!("project size in {name:?}"))?;
        return Ok(Arc::new(CppMechanism { k }));
    }
    match name {
        "vcg" => Ok(Arc::new(VcgMechanism::default())),
        "greedy" => Ok(Arc::new(GreedyMechanism)),
        _ => bail!("unknown mechanism {name:?}; expected vcg, greedy, dictator:<i>, or cpp:<k>"),
    }
}

pub fn parse_multiunit(name: &str) -> Result<Box<dyn MultiUnitMechanism>> {
    match name {
        "midr" => Ok(Box::new(MidrMultiUnit)),
        "uniform-split" => Ok(Box::new(UniformSplitMechanism)),
        _ => bail!("unknown multi-unit mechanism {name:?}; expected midr or uniform-split"),
    }
}

fn assignment_bits(assignment: &[bool]) -> String {
    assignment.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn verdict_summary(verdict: &Verdict) -> String {
    match verdict {
        Verdict::Sat { assignment } => format!("SAT {}", assignment_bits(assignment)),
        Verdict::PresumedUnsat => "PRESUMED_UNSAT".to_string(),
    }
}

#[derive(Serialize)]
struct PropsReport<'a> {
    suite: &'static str,
    cases: usize,
    seed: u64,
    violations: &'a [SuiteCase],
}

pub fn props(args: &PropsArgs, ctx: &Ctx) -> Result<i32> {
    let (suite, bonus_cases, coverage_cases) = match args.suite {
        SuiteKind::Structural => ("structural", args.bonus_cases, args.coverage_cases),
        SuiteKind::Submodularity => ("submodularity", args.bonus_cases, args.coverage_cases),
        SuiteKind::Bonus => ("bonus", args.bonus_cases, 0),
        SuiteKind::Coverage => ("coverage", 0, args.coverage_cases),
    };
    let config = SuiteConfig {
        bonus_cases,
        bonus_m_max: args.max_m,
        coverage_cases,
        seed: ctx.seed(args.seed),
    };
    let report = run_structural_suite(&config)?;
    eprintln!(
        "props: {} cases, {} violations, {} ms",
        report.cases,
        report.violations.len(),
        report.elapsed_ms
    );
    ctx.emit(&PropsReport {
        suite,
        cases: report.cases,
        seed: report.seed,
        violations: &report.violations,
    })?;
    Ok(if report.violations.is_empty() { 0 } else { 1 })
}

pub fn reduce_ca(args: &ReduceCaArgs, ctx: &Ctx) -> Result<i32> {
    let phi = load_formula(&args.formula)?;
    let mech = parse_mechanism(&args.mech)?;
    let mut config = match &args.config {
        Some(path) => read_json::<CAReductionConfig>(path)?,
        None => CAReductionConfig::new(phi.num_vars() + 2, 2, phi.num_vars(), 8, 0),
    };
    if let Some(repeats) = args.repeats {
        config.outer_repeats = repeats;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.seed = ctx.seed(config.seed);
    let report = run_reduction_ca(&phi, &mech, &config)?;
    eprintln!(
        "reduce-ca: {} after {} sweeps, {} trials, {} ms",
        verdict_summary(&report.verdict),
        report.sweeps_run,
        report.trials.len(),
        report.timing_ms.unwrap_or(0)
    );
    ctx.emit(&report.canonical())?;
    Ok(if report.verdict.is_sat() { 0 } else { 1 })
}

pub fn reduce_tie(args: &ReduceTieArgs, ctx: &Ctx) -> Result<i32> {
    let phi = load_formula(&args.formula)?;
    let mech = parse_mechanism(&args.mech)?;
    let advice: TieAdvice = read_json(&args.advice)?;
    let m0 = match args.m0 {
        Some(m0) => m0,
        None => (2 * advice.code.m_code)
            .checked_shl(advice.j as u32)
            .context("advice level overflows the carrier size")?,
    };
    let seed = ctx.seed(args.seed);
    let config = TieConfig::from_advice(args.ell, m0, &advice, args.trials, seed);
    let report = run_tie_extraction(&phi, &mech, &config)?;
    eprintln!(
        "reduce-tie: {} after {} sweeps, {} trials, {} ms",
        verdict_summary(&report.verdict),
        report.sweeps_run,
        report.trials.len(),
        report.timing_ms.unwrap_or(0)
    );
    ctx.emit(&report.canonical())?;
    Ok(if report.verdict.is_sat() { 0 } else { 1 })
}

#[derive(Serialize)]
struct CppEntry {
    path: String,
    seed: u64,
    report: CppReport,
}

#[derive(Serialize)]
struct CppBatchReport {
    config: CPPConfig,
    instances: Vec<CppEntry>,
}

pub fn reduce_cpp(args: &ReduceCppArgs, ctx: &Ctx) -> Result<i32> {
    let mech_override = args.mech.as_deref().map(parse_mechanism).transpose()?;
    if let Some(mech) = &mech_override {
        if !mech.name().starts_with("cpp") {
            bail!("reduce-cpp runs a public-project mechanism; got {:?}", args.mech);
        }
    }
    let threshold = args
        .certify_threshold
        .as_deref()
        .map(|s| parse_rat(s, "--certify-threshold"))
        .transpose()?;
    let mut base = match &args.config {
        Some(path) => read_json::<CPPConfig>(path)?,
        None => CPPConfig {
            c: rat_from_str("1/2").unwrap(),
            epsilon: rat_from_str("1/100").unwrap(),
            p_m: rat_from_str("0").unwrap(),
            no_fraction: None,
            yes_fraction: None,
            trials: 5,
            seed: 0,
        },
    };
    base.seed = ctx.seed(base.seed);

    let mut loaded = Vec::new();
    for path in &args.instance {
        let inst: RegularCoverInstance = read_json(path)?;
        let inst = match (&inst.kind, &threshold) {
            (CoverKind::Unknown, Some(t)) => stamp_certified(&inst, t)?,
            _ => inst,
        };
        loaded.push((path.display().to_string(), inst));
    }

    let base_ref = &base;
    let mech_ref = &mech_override;
    let entries = fan_out(loaded, ctx.workers, |i, (path, inst)| {
        let mech: MechanismHandle = match mech_ref {
            Some(m) => m.clone(),
            None => Arc::new(CppMechanism { k: inst.k }),
        };
        let mut config = base_ref.clone();
        config.seed = subseed(base_ref.seed, 0x4350_5030, i as u64);
        let report = cpp_decision(&inst, &mech, &config)?;
        eprintln!(
            "reduce-cpp: {path}: {} mean {} cutoff {}",
            if report.verdict_yes { "YES" } else { "NO" },
            report.mean,
            report.cutoff
        );
        Ok(CppEntry { path, seed: config.seed, report })
    })?;

    let all_yes = entries.iter().all(|e| e.report.verdict_yes);
    ctx.emit(&CppBatchReport { config: base, instances: entries })?;
    Ok(if all_yes { 0 } else { 1 })
}

pub fn reduce_mua(args: &ReduceMuaArgs, ctx: &Ctx) -> Result<i32> {
    let mech = parse_multiunit(&args.mech)?;
    let seed = ctx.seed(args.seed);
    if let Some(x) = args.lemma52 {
        let m = args.m.unwrap_or(8);
        let epsilon = parse_rat(&args.epsilon, "--epsilon")?;
        let trials = args.trials.unwrap_or(200);
        let report = lemma52_check(mech.as_ref(), x, m, &epsilon, trials, seed)?;
        eprintln!(
            "reduce-mua: split ({x}, {}) rate {} against bound {}: {}",
            m - x,
            report.rate,
            report.bound,
            if report.meets_bound { "met" } else { "below" }
        );
        ctx.emit(&report)?;
        return Ok(if report.meets_bound { 0 } else { 1 });
    }

    let path = args.formula.as_ref().context("--formula is required without --lemma52")?;
    let phi = load_formula(path)?;
    let m = match args.m {
        Some(m) => m,
        None => 1u64
            .checked_shl(phi.num_vars() as u32)
            .context("formula too wide for a power-of-two supply")?,
    };
    let trials = args.trials.unwrap_or(8);
    let report = mua_extract(&phi, mech.as_ref(), m, trials, seed)?;
    match &report.found {
        Some(assignment) => eprintln!(
            "reduce-mua: SAT {} after {} trials",
            assignment_bits(assignment),
            report.trials.len()
        ),
        None => eprintln!("reduce-mua: no assignment in {} trials", report.trials.len()),
    }
    ctx.emit(&report)?;
    Ok(if report.found.is_some() { 0 } else { 1 })
}

#[derive(Serialize)]
struct MenuMember {
    items: Vec<usize>,
    /// "num/den", or null when the bundle is priced out entirely.
    price: Option<String>,
}

#[derive(Serialize)]
struct MenuProbe {
    items: Vec<usize>,
    is_candidate: bool,
    /// "num/den", "inf", or null when the probe never saw a price.
    observed_price: Option<String>,
    price_exceeds_p: Option<bool>,
}

#[derive(Serialize)]
struct MenuReport {
    mech: String,
    m: usize,
    k: usize,
    p: String,
    special: usize,
    /// Null when the mechanism has no exact menu oracle.
    members: Option<Vec<MenuMember>>,
    probes: Vec<MenuProbe>,
}

fn price_string(price: &MenuPrice) -> Option<String> {
    price.as_finite().map(rat_to_string)
}

pub fn menu(args: &MenuArgs, ctx: &Ctx) -> Result<i32> {
    let mech = parse_mechanism(&args.mech)?;
    let specs: Vec<ValuationSpec> = read_json(&args.bidders)?;
    let others = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| spec.build().with_context(|| format!("building bidder {i}")))
        .collect::<Result<Vec<ValuationHandle>>>()?;
    let p = parse_rat(&args.p, "--p")?;
    let params = SubmenuParams::new(args.k, p.clone(), args.m)?;

    let members = match menu_oracle(mech.as_ref(), &others, args.m, args.special) {
        Ok(oracle) => {
            let bundles = enumerate_structured_submenu(oracle.as_ref(), &params)?;
            Some(
                bundles
                    .into_iter()
                    .map(|b| MenuMember {
                        items: b.to_vec(),
                        price: price_string(&oracle.price(b)),
                    })
                    .collect::<Vec<_>>(),
            )
        }
        Err(MenuError::Unsupported(name)) => {
            eprintln!("menu: {name} has no exact menu oracle; enumeration skipped");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let seed = ctx.seed(args.seed);
    let mut probes = Vec::new();
    let mut transcripts = String::new();
    for (i, text) in args.probe.iter().enumerate() {
        let s = parse_bundle(text, args.m)?;
        let verdict = probe_candidate(
            mech.as_ref(),
            &others,
            args.special,
            args.m,
            s,
            &params,
            subseed(seed, 0x4d45_4e55, i as u64),
        )?;
        transcripts.push_str(&verdict.transcript_json_lines());
        probes.push(MenuProbe {
            items: verdict.s.to_vec(),
            is_candidate: verdict.is_candidate,
            observed_price: match &verdict.observed_price {
                Some(MenuPrice::Finite(r)) => Some(rat_to_string(r)),
                Some(MenuPrice::Infinite) => Some("inf".to_string()),
                None => None,
            },
            price_exceeds_p: verdict.price_exceeds_p,
        });
    }
    if let Some(path) = &args.transcripts {
        fs::write(path, &transcripts)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    eprintln!(
        "menu: {} members at k = {}, p = {}; {} probes",
        members.as_ref().map_or("no".to_string(), |m| m.len().to_string()),
        args.k,
        rat_to_string(&p),
        probes.len()
    );
    ctx.emit(&MenuReport {
        mech: args.mech.clone(),
        m: args.m,
        k: args.k,
        p: rat_to_string(&p),
        special: args.special,
        members,
        probes,
    })?;
    Ok(0)
}

fn parse_bundle(text: &str, m: usize) -> Result<Bundle> {
    let mut items = Vec::new();
    for part in text.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .with_context(|| format!("item index {part:?} in --probe {text:?}"))?;
        if i >= m {
            bail!("item {i} out of range for m = {m} in --probe {text:?}");
        }
        items.push(i);
    }
    Ok(Bundle::from_indices(items))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditConfigFile {
    mech: String,
    m: usize,
    #[serde(default = "default_epsilon")]
    epsilon: String,
    bidders: Vec<ValuationSpec>,
    misreports: Vec<ValuationSpec>,
    #[serde(default)]
    trials: Option<usize>,
    #[serde(default)]
    trial_seed: Option<u64>,
}

fn default_epsilon() -> String {
    "0".to_string()
}

#[derive(Serialize)]
struct AuditOut<'a> {
    mech: &'a str,
    m: usize,
    epsilon: &'a str,
    bidders: usize,
    misreports: usize,
    #[serde(flatten)]
    report: &'a AuditReport,
}

pub fn audit(args: &AuditArgs, ctx: &Ctx) -> Result<i32> {
    let config: AuditConfigFile = read_json(&args.config)?;
    let mech = parse_mechanism(&config.mech)?;
    let eps = parse_rat(&config.epsilon, "epsilon")?;
    let bidders = config
        .bidders
        .iter()
        .enumerate()
        .map(|(i, spec)| spec.build().with_context(|| format!("building bidder {i}")))
        .collect::<Result<Vec<_>>>()?;
    let misreports = config
        .misreports
        .iter()
        .enumerate()
        .map(|(i, spec)| spec.build().with_context(|| format!("building misreport {i}")))
        .collect::<Result<Vec<_>>>()?;
    let inst = Instance::new(config.m, bidders)?;
    let trials = args
        .trials
        .or(config.trials)
        .map(|t| (t, ctx.seed(config.trial_seed.unwrap_or(0))));
    let report = audit_truthfulness(mech.as_ref(), &inst, &misreports, &eps, trials)?;
    eprintln!(
        "audit: {} pairs, {} violations{}",
        report.pairs_checked,
        report.violations.len(),
        report
            .worst_ratio
            .as_deref()
            .map_or(String::new(), |r| format!(", worst ratio {r}"))
    );
    ctx.emit(&AuditOut {
        mech: &config.mech,
        m: config.m,
        epsilon: &config.epsilon,
        bidders: config.bidders.len(),
        misreports: config.misreports.len(),
        report: &report,
    })?;
    Ok(if report.passed() { 0 } else { 1 })
}

pub fn claim25(args: &Claim25Args, ctx: &Ctx) -> Result<i32> {
    if args.family.is_some() && args.ell.len() > 1 {
        bail!("--family fixes one family size; use it with a single --ell");
    }
    let seed = ctx.seed(args.seed);
    let trials = args.trials;
    let family = args.family;
    let runs = fan_out(args.ell.clone(), ctx.workers, |i, ell| {
        let family_size = match family {
            Some(f) => f,
            None => (1usize << (2 * ell)) + 1,
        };
        let report =
            verify_claim25(ell, family_size, trials, subseed(seed, 0x4332_3543, i as u64))?;
        eprintln!(
            "claim25: ell {ell} family {family_size}: miss {} against {}: {}; pair {} against {}: {}",
            report.miss_rate,
            report.miss_bound,
            if report.miss_within_bound { "ok" } else { "exceeded" },
            report.pair_rate,
            report.pair_expected,
            if report.pair_within_3sigma { "ok" } else { "off" }
        );
        Ok(report)
    })?;

    if let Some(path) = &args.csv {
        fs::write(path, claim25_csv(&runs)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.plot {
        fs::write(path, plot::claim25_svg(&runs))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let ok = runs.iter().all(|r| {
        r.miss_within_bound && r.singleton_within_3sigma && r.pair_within_3sigma
    });
    #[derive(Serialize)]
    struct Claim25Out<T: Serialize> {
        runs: T,
    }
    ctx.emit(&Claim25Out { runs: &runs })?;
    Ok(if ok { 0 } else { 1 })
}

fn claim25_csv(runs: &[auctionkit::reductions::ca::Claim25Report]) -> String {
    let mut out = String::from(
        "ell,m,family_size,trials,misses,miss_rate,miss_bound,miss_within_bound,\
         singleton_hits,singleton_rate,singleton_expected,singleton_within_3sigma,\
         pair_hits,pair_rate,pair_expected,pair_within_3sigma,seed\n",
    );
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.ell,
            r.m,
            r.family_size,
            r.trials,
            r.misses,
            r.miss_rate,
            r.miss_bound,
            r.miss_within_bound,
            r.singleton_hits,
            r.singleton_rate,
            r.singleton_expected,
            r.singleton_within_3sigma,
            r.pair_hits,
            r.pair_rate,
            r.pair_expected,
            r.pair_within_3sigma,
            r.seed,
        ));
    }
    out
}
