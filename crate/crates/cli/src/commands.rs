use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};
use snml_core::analysis::{
    self, fmt17, higher_order_check, sigma_ode_check, AnalysisReport, Classification, TestSet, Verdict,
};
use snml_core::strategies::{
    bayes_jeffreys_predictive, conditional_regret, default_m, snml_predictive, strategy_log_joint,
};
use snml_core::{tweedie_sample, FamilySpec, ObservationSequence, Strategy};

use crate::args::{parse_grid, parse_list, parse_sweep_grid, Command, ExpectArg, Format, OutputArgs, SequenceArgs};
use crate::Failure;

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Kl { family, mu0, mu1, out } => {
            let family = family.resolve()?;
            let kl = family.kl_divergence(mu0, mu1)?;
            let text = match out.format {
                Format::Json => format!("{}\n", json_number(kl)),
                Format::Csv => format!("mu0,mu1,kl\n{},{},{}\n", fmt17(mu0), fmt17(mu1), fmt17(kl)),
            };
            emit(&out, &text)
        }
        Command::Predict {
            family,
            history,
            strategy,
            grid,
            out,
        } => {
            let family = family.resolve()?;
            let grid = parse_grid(&grid)?;
            let m = history.len();
            let seq = ObservationSequence::new(history.clone(), m)?;
            let pred = match strategy.into() {
                Strategy::Snml => snml_predictive(&family, &seq)?,
                Strategy::BayesJeffreys => bayes_jeffreys_predictive(&family, &seq)?,
                other => {
                    return Err(Failure::usage(format!(
                        "--strategy: {} has no one-step predictive; use `joint`",
                        strategy_name(other)
                    )))
                }
            };
            let rows: Vec<(f64, f64, f64)> = grid.iter().map(|&x| (x, pred.log_prob(x), pred.prob(x))).collect();
            let text = match out.format {
                Format::Json => {
                    let points: Vec<Value> = rows
                        .iter()
                        .map(|&(x, lp, p)| json!({ "x": x, "log_prob": json_number(lp), "prob": p }))
                        .collect();
                    let doc = json!({
                        "family": family.name(),
                        "strategy": strategy_name(strategy.into()),
                        "history": history,
                        "log_normalizer": json_number(pred.log_normalizer()),
                        "points": points,
                    });
                    pretty(&doc)
                }
                Format::Csv => {
                    let mut s = String::new();
                    writeln!(s, "# family: {}", family.name()).unwrap();
                    writeln!(s, "# strategy: {}", strategy_name(strategy.into())).unwrap();
                    writeln!(s, "# log_normalizer: {}", fmt17(pred.log_normalizer())).unwrap();
                    s.push_str("x,log_prob,prob\n");
                    for (x, lp, p) in rows {
                        writeln!(s, "{},{},{}", fmt17(x), fmt17(lp), fmt17(p)).unwrap();
                    }
                    s
                }
            };
            emit(&out, &text)
        }
        Command::Joint {
            family,
            seq,
            strategy,
            out,
        } => {
            let family = family.resolve()?;
            let seq = sequence(&family, &seq)?;
            let strategy: Strategy = strategy.into();
            let log_joint = strategy_log_joint(&family, strategy, &seq)?;
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "family": family.name(),
                    "strategy": strategy_name(strategy),
                    "sequence": seq.values(),
                    "m": seq.m(),
                    "n": seq.len(),
                    "log_joint": json_number(log_joint),
                    "joint": json_number(log_joint.exp()),
                })),
                Format::Csv => format!(
                    "strategy,m,n,log_joint,joint\n{},{},{},{},{}\n",
                    strategy_name(strategy),
                    seq.m(),
                    seq.len(),
                    fmt17(log_joint),
                    fmt17(log_joint.exp())
                ),
            };
            emit(&out, &text)
        }
        Command::Regret {
            family,
            seq,
            strategy,
            out,
        } => {
            let family = family.resolve()?;
            let seq = sequence(&family, &seq)?;
            let strategy: Strategy = strategy.into();
            let r = conditional_regret(&family, strategy, &seq)?;
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "family": family.name(),
                    "strategy": strategy_name(strategy),
                    "sequence": seq.values(),
                    "record": r,
                })),
                Format::Csv => format!(
                    "strategy,m,n,strategy_loss,best_expert_loglik,regret\n{},{},{},{},{},{}\n",
                    strategy_name(strategy),
                    r.m,
                    r.n,
                    fmt17(r.strategy_loss),
                    fmt17(r.best_expert_loglik),
                    fmt17(r.regret)
                ),
            };
            emit(&out, &text)
        }
        Command::CheckConstancy {
            family,
            n,
            grid,
            expect,
            out,
        } => {
            let family = family.resolve()?;
            let grid = parse_sweep_grid(&grid)?;
            let report = analysis::check_constancy(&family, n, &grid)?;
            emit_report(&out, &report)?;
            check(expect.expect, report.verdict)
        }
        Command::CheckExchangeability {
            family,
            m,
            n,
            seqs,
            count,
            seed,
            expect,
            out,
        } => {
            let family = family.resolve()?;
            let m = m.unwrap_or_else(|| default_m(&family));
            let set = if !seqs.is_empty() {
                if count.is_some() {
                    return Err(Failure::usage("give either --seq or --count, not both"));
                }
                let parsed = seqs
                    .iter()
                    .map(|s| parse_list(s).map_err(|e| Failure::usage(format!("--seq: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                TestSet::Sequences(parsed)
            } else if let Some(count) = count {
                TestSet::RandomContinuations { count, seed }
            } else if family.is_discrete() {
                TestSet::AllDiscrete
            } else {
                TestSet::RandomContinuations { count: 20, seed }
            };
            let report = analysis::exchangeability_test(&family, m, n, &set)?;
            emit_report(&out, &report)?;
            check(expect.expect, report.verdict)
        }
        Command::CheckOde { vf, grid, expect, out } => {
            let vf = vf.resolve()?;
            let grid = match grid {
                Some(g) => parse_sweep_grid(&g)?,
                None => vf.default_grid(9),
            };
            let ode = sigma_ode_check(&vf, &grid)?;
            let higher = higher_order_check(&vf, &grid)?;
            let verdict = Verdict::combine(&[ode.report.verdict, higher.verdict()]);
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "variance_function": vf.to_string(),
                    "verdict": verdict,
                    "ode": ode,
                    "higher_order": higher,
                })),
                Format::Csv => ode.report.to_csv(),
            };
            emit(&out, &text)?;
            check(expect.expect, verdict)
        }
        Command::Classify { vf, expect, out } => {
            let vf = vf.resolve()?;
            let class = analysis::classify_family(&vf)?;
            let text = match out.format {
                Format::Json => pretty(&json!({
                    "variance_function": vf.to_string(),
                    "exchangeable": class.is_exchangeable(),
                    "classification": class,
                })),
                Format::Csv => classification_csv(&vf.to_string(), &class),
            };
            emit(&out, &text)?;
            let verdict = if class.is_exchangeable() {
                Verdict::Constant
            } else {
                Verdict::NonConstant
            };
            check(expect.expect, verdict)
        }
        Command::Laplace {
            family,
            mu0,
            position,
            n_list,
            expect,
            out,
        } => {
            let family = family.resolve()?;
            if n_list.is_empty() {
                return Err(Failure::usage("--n-list is empty"));
            }
            let report = analysis::laplace_asymptotics_check(&family, mu0, position.into(), &n_list)?;
            emit_report(&out, &report)?;
            check(expect.expect, report.verdict)
        }
        Command::SampleTweedie { mu, n, seed, output } => {
            let draws = tweedie_sample(mu, n, seed)?;
            let mut text = String::with_capacity(draws.len() * 24);
            for x in draws {
                writeln!(text, "{x:?}").unwrap();
            }
            write_to(output.as_deref(), &text)
        }
    }
}

fn sequence(family: &FamilySpec, args: &SequenceArgs) -> Result<ObservationSequence, Failure> {
    if args.seq.is_empty() {
        return Err(Failure::usage("--seq is empty"));
    }
    let m = args.m.unwrap_or_else(|| default_m(family));
    if m > args.seq.len() {
        return Err(Failure::usage(format!("--m {m} exceeds the sequence length {}", args.seq.len())));
    }
    Ok(ObservationSequence::new(args.seq.clone(), m)?)
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Snml => "snml",
        Strategy::BayesJeffreys => "bayes",
        Strategy::Cnml => "cnml",
        Strategy::Nml => "nml",
    }
}

/// JSON has no infinities; they become strings.
fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn classification_csv(vf: &str, class: &Classification) -> String {
    let mut s = String::from("field,value\n");
    writeln!(s, "variance_function,{}", csv_field(vf)).unwrap();
    writeln!(s, "exchangeable,{}", class.is_exchangeable()).unwrap();
    if let Ok(Value::Object(map)) = serde_json::to_value(class) {
        for (k, v) in map {
            let v = match v {
                Value::String(t) => t,
                Value::Number(x) => x.as_f64().map(fmt17).unwrap_or_else(|| x.to_string()),
                Value::Null => String::new(),
                other => other.to_string(),
            };
            writeln!(s, "{k},{}", csv_field(&v)).unwrap();
        }
    }
    s
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

fn emit_report(out: &OutputArgs, report: &AnalysisReport) -> Result<(), Failure> {
    let text = match out.format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Csv => report.to_csv(),
    };
    emit(out, &text)
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    write_to(out.output.as_deref(), text)
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("--output {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

fn check(expect: Option<ExpectArg>, verdict: Verdict) -> Result<(), Failure> {
    match expect {
        Some(e) if e.verdict() != verdict => Err(Failure::Unexpected(format!(
            "verdict {} contradicts --expect {}",
            verdict.describe(),
            e.verdict().describe()
        ))),
        _ => Ok(()),
    }
}
