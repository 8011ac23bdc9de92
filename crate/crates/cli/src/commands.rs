use coarsekit::coverings::faithfulness_report;
use coarsekit::lifting::{limsup_norm_profile, lift_group_ring, local_multiplicativity_check, LiftWindow};
use coarsekit::onl::{
    amplify_constant, lacunary_control_radius, onl_constant_floor, onl_estimate, sample_ensemble, AmplifyMode,
    ControlFunction, EnsembleSpec,
};
use coarsekit::quantk::{
    check_quasi_projection, check_quasi_unitary, index_form, lift_path, qs_qi_records, round_to_projection,
    unit_corner, LinearOracle, LocalisationPath, QuantParams, EXACT_TOL,
};
use coarsekit::smallcancel::{
    check_condition, compute_pieces, lacunarity_check, relators_from_graph, schedule_from_graphs, schedule_general,
    Condition, LabelledGraph, Presentation, Schedule,
};
use coarsekit::sobolev::{lift_isometry_check, rd_constant_estimate, sample_elements, LengthFunction};
use coarsekit::spaces::{annular_decomposition, girth, hyperbolicity_delta, Delta};
use coarsekit::{Dist, Operator};

use crate::cli::*;
use crate::error::{ensure, CliError, CliResult};
use crate::report::Report;
use crate::specs::{covering, covering_family, group, read_file, space};

fn in_unit(name: &str, v: f64) -> CliResult<()> {
    ensure(v > 0.0 && v < 1.0, || format!("{name} = {v} must lie in (0, 1)"))
}

fn quarter(name: &str, v: f64) -> CliResult<()> {
    ensure(v > 0.0 && v < 0.25, || format!("{name} = {v} must lie in (0, 1/4)"))
}

fn positive(name: &str, v: usize) -> CliResult<()> {
    ensure(v > 0, || format!("{name} must be at least 1"))
}

fn csv_dat(header: &str, rows: &[String]) -> (String, String) {
    let csv = std::iter::once(header.to_string())
        .chain(rows.iter().cloned())
        .map(|l| l + "\n")
        .collect();
    let dat = std::iter::once(format!("# {}", header.replace(',', " ")))
        .chain(rows.iter().map(|r| r.replace(',', " ")))
        .map(|l| l + "\n")
        .collect();
    (csv, dat)
}

pub fn run(command: &Command) -> CliResult<Report> {
    let effective = format!("{command:?}");
    match command {
        Command::Space(c) => space_cmd(c, &effective),
        Command::Cover(c) => cover_cmd(c, &effective),
        Command::Lift(c) => lift_cmd(c, &effective),
        Command::Onl(c) => onl_cmd(c, &effective),
        Command::Quantk(c) => quantk_cmd(c, &effective),
        Command::Rd(c) => rd_cmd(c, &effective),
        Command::Sc(c) => sc_cmd(c, &effective),
    }
}

fn space_cmd(cmd: &SpaceCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        SpaceCmd::Girth { space: input } => {
            let s = space(input)?;
            let g = girth(&s);
            println!("{g}");
            let mut r = Report::new("space girth", eff, None);
            r.set("points", s.len());
            r.set("girth", g.length());
            r.set("diameter", s.diameter());
            Ok(r)
        }
        SpaceCmd::Delta { space: input, max_points } => {
            let s = space(input)?;
            let d = hyperbolicity_delta(&s, *max_points)?;
            println!("{d}");
            let mut r = Report::new("space delta", eff, None);
            r.set("points", s.len());
            r.set("delta", d.value());
            r.set("convention", Delta::CONVENTION);
            Ok(r)
        }
        SpaceCmd::Annuli { space: input, width } => {
            ensure(*width >= 1, || "width must be at least 1".into())?;
            let s = space(input)?;
            let ann = annular_decomposition(&s, *width)?;
            let rows: Vec<String> = ann.parts.iter().enumerate().map(|(k, p)| format!("{k},{}", p.len())).collect();
            for row in &rows {
                println!("{}", row.replace(',', " "));
            }
            let mut r = Report::new("space annuli", eff, None);
            r.set("width", width);
            r.set("parts", ann.parts.iter().map(Vec::len).collect::<Vec<_>>());
            let (csv, dat) = csv_dat("annulus,size", &rows);
            r.file("annuli.csv", csv);
            r.file("annuli.dat", dat);
            Ok(r)
        }
    }
}

fn cover_cmd(cmd: &CoverCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        CoverCmd::Radius { cover } => {
            let c = covering(cover)?;
            let rad = c.injectivity_radius();
            println!("{rad}");
            let mut r = Report::new("cover radius", eff, None);
            r.set("source", &cover.source);
            r.set("target", &cover.target);
            r.set("ball", c.source_ball_radius());
            r.set("injectivity_radius", rad);
            r.set("capped", c.radius_capped());
            r.set("witness", c.witness());
            Ok(r)
        }
        CoverCmd::Faithfulness { source, targets, ball } => {
            let family = covering_family(source, targets, *ball)?;
            let rep = faithfulness_report(&family)?;
            let rows: Vec<String> = rep
                .terms
                .iter()
                .map(|t| format!("{},{},{},{}", t.m, targets[t.m], t.radius, t.capped))
                .collect();
            for row in &rows {
                println!("{}", row.replace(',', " "));
            }
            println!("verdict {:?}", rep.verdict);
            let mut r = Report::new("cover faithfulness", eff, None);
            r.set("report", &rep);
            let (csv, dat) = csv_dat("m,target,radius,capped", &rows);
            r.file("faithfulness.csv", csv);
            r.file("faithfulness.dat", dat);
            Ok(r)
        }
    }
}

fn lift_cmd(cmd: &LiftCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        LiftCmd::Profile {
            source,
            targets,
            ball,
            support,
            terms,
            seed,
            tail,
            c,
        } => {
            positive("terms", *terms)?;
            if let Some(c) = c {
                in_unit("c", *c)?;
            }
            let family = covering_family(source, targets, *ball)?;
            let first = &family[0];
            let q = first.target_group().expect("quotient covering");
            let window = LiftWindow::new(first, *support)?;
            let a = sample_elements(q.as_ref(), *support, 1, *terms, *seed)?.remove(0);
            let lifted = lift_group_ring(&a, &window)?;
            let profile = limsup_norm_profile(&lifted, &family, 1e-10, *tail, *c)?;
            println!("norm_base {}", profile.norm_base);
            println!("limsup {}", profile.limsup_estimate);
            let mut r = Report::new("lift profile", eff, Some(*seed));
            r.set("profile", &profile);
            let rows: Vec<String> = profile
                .terms
                .iter()
                .filter_map(|t| t.ratio.map(|x| format!("{} {}", t.m, x)))
                .collect();
            r.file("profile.csv", profile.to_csv());
            r.file("profile.dat", format!("# m ratio\n{}", rows.iter().map(|l| format!("{l}\n")).collect::<String>()));
            Ok(r)
        }
        LiftCmd::Mult {
            cover,
            window,
            pairs,
            seed,
        } => {
            positive("pairs", *pairs)?;
            let c = covering(cover)?;
            let big = window.unwrap_or_else(|| c.injectivity_radius());
            let q = c.target_group().expect("quotient covering").arc_space();
            let mut max_diff = 0.0f64;
            let mut equal = 0;
            let mut admissible = 0;
            for i in 0..*pairs {
                let ps = (i as Dist) % (big + 1);
                let pt = big - ps;
                let draw = |radius: Dist, k: u64| {
                    let spec = EnsembleSpec {
                        gaussian: 1,
                        adjacency_powers: false,
                        permutations: 0,
                        seed: seed.wrapping_mul(1_000_003).wrapping_add(k),
                    };
                    sample_ensemble::<f64>(&q, radius, &spec).remove(0).op
                };
                let s = draw(ps, 2 * i as u64);
                let t = draw(pt, 2 * i as u64 + 1);
                let rep = local_multiplicativity_check(&s, &t, &c, big)?;
                max_diff = max_diff.max(rep.max_diff);
                equal += usize::from(rep.equal);
                admissible += usize::from(rep.admissible);
            }
            println!("pairs={pairs} admissible={admissible} equal={equal} max_diff={max_diff:e}");
            let mut r = Report::new("lift mult", eff, Some(*seed));
            r.set("window", big);
            r.set("pairs", pairs);
            r.set("admissible", admissible);
            r.set("equal", equal);
            r.set("max_diff", max_diff);
            Ok(r)
        }
    }
}

fn control_function(spec: Option<&str>) -> CliResult<ControlFunction> {
    let Some(spec) = spec else {
        return Ok(ControlFunction::step(vec![(0, 0)])?);
    };
    let bad = || CliError::Config(format!("control function '{spec}' (use linear:A,B or step:K=V,...)"));
    match spec.split_once(':') {
        Some(("linear", ab)) => {
            let (a, b) = ab.split_once(',').ok_or_else(bad)?;
            Ok(ControlFunction::linear(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        }
        Some(("step", pts)) => {
            let points = pts
                .split(',')
                .map(|kv| {
                    let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                    Ok((k.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?))
                })
                .collect::<CliResult<Vec<(u64, u64)>>>()?;
            ControlFunction::step(points).map_err(|e| CliError::Config(e.to_string()))
        }
        _ => Err(bad()),
    }
}

fn onl_cmd(cmd: &OnlCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        OnlCmd::Estimate {
            space: input,
            radius,
            c,
            seed,
            gaussian,
            permutations,
            no_powers,
            cap,
        } => {
            in_unit("c", *c)?;
            let spec = EnsembleSpec {
                gaussian: *gaussian,
                adjacency_powers: !no_powers,
                permutations: *permutations,
                seed: *seed,
            };
            ensure(spec.gaussian + spec.permutations > 0 || spec.adjacency_powers, || {
                "ensemble is empty".into()
            })?;
            let s = space(input)?;
            let cert = onl_estimate(&s, *radius, *c, &spec, *cap)?;
            match cert.f_r {
                Some(f) => println!("f_R={f}"),
                None => println!("f_R=none"),
            }
            println!("min_ratio={}", cert.min_ratio);
            let mut r = Report::new("onl estimate", eff, Some(*seed));
            r.set("certificate", &cert);
            r.file("certificate.json", cert.summary_json() + "\n");
            Ok(r)
        }
        OnlCmd::Amplify { c, target, mode, f } => {
            in_unit("c", *c)?;
            in_unit("target", *target)?;
            let f = control_function(f.as_deref())?;
            let mode = match mode {
                Mode::Root => AmplifyMode::Root,
                Mode::Verbatim => AmplifyMode::Verbatim,
            };
            let amp = amplify_constant(*c, &f, *target, mode)?;
            println!("n={}", amp.n);
            println!("g(k)={}", amp.g);
            let mut r = Report::new("onl amplify", eff, None);
            r.set("amplification", &amp);
            r.set("g", amp.g.to_string());
            Ok(r)
        }
        OnlCmd::Lacunary { delta, r, sweep } => {
            let (delta, rs): (Vec<u64>, Vec<u64>) = match sweep {
                Some(m) => {
                    ensure(*m >= 1, || "sweep length must be at least 1".into())?;
                    (1..=*m).map(|k| (k, 40 * k * k)).unzip()
                }
                None => (delta.clone(), r.clone()),
            };
            ensure(!delta.is_empty(), || "give --delta and --r, or --sweep".into())?;
            ensure(delta.len() == rs.len(), || "--delta and --r need equal lengths".into())?;
            ensure(delta.iter().chain(&rs).all(|&v| v > 0), || "delta and r must be positive".into())?;
            let lc = lacunary_control_radius(&delta, &rs, None)?;
            let rows: Vec<String> = (0..delta.len())
                .map(|m| format!("{},{},{},{},{}", m + 1, delta[m], rs[m], lc.radii[m], lc.radii_alt[m]))
                .collect();
            if rows.len() <= 20 {
                for row in &rows {
                    println!("{}", row.replace(',', " "));
                }
            }
            println!("verdict {:?}", lc.verdict);
            let mut rep = Report::new("onl lacunary", eff, None);
            rep.set("verdict", lc.verdict);
            rep.set("formula", &lc.formula);
            rep.set("evidence", &lc.evidence);
            let (csv, dat) = csv_dat("m,delta,r,R,R_alt", &rows);
            rep.file("lacunary.csv", csv);
            rep.file("lacunary.dat", dat);
            Ok(rep)
        }
        OnlCmd::Floor { degree } => {
            let v = onl_constant_floor(*degree)?;
            println!("{v}");
            let mut r = Report::new("onl floor", eff, None);
            r.set("degree", degree);
            r.set("floor", v);
            Ok(r)
        }
    }
}

fn load_operator(input: &SpaceInput, path: &std::path::Path) -> CliResult<Operator> {
    let s = space(input)?;
    Ok(Operator::from_coo(s, &read_file(path)?)?)
}

fn quantk_cmd(cmd: &QuantkCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        QuantkCmd::Check {
            space: input,
            operator,
            r,
            eps,
            unitary,
        } => {
            quarter("eps", *eps)?;
            let params = QuantParams::new(*r, *eps)?;
            let op = load_operator(input, operator)?;
            let mut rep = Report::new("quantk check", eff, None);
            if *unitary {
                let q = check_quasi_unitary(&op, params)?;
                println!("left={:e} right={:e} propagation={} passes={}", q.left_residual, q.right_residual, q.propagation, q.passes);
                rep.set("quasi_unitary", &q);
            } else {
                let q = check_quasi_projection(&op, params)?;
                println!(
                    "self_adjoint={:e} idempotent={:e} propagation={} passes={}",
                    q.self_adjoint_residual, q.idempotent_residual, q.propagation, q.passes
                );
                rep.set("quasi_projection", &q);
            }
            Ok(rep)
        }
        QuantkCmd::Round {
            space: input,
            operator,
            r,
            eps,
        } => {
            quarter("eps", *eps)?;
            let params = QuantParams::new(*r, *eps)?;
            let op = load_operator(input, operator)?;
            let rounded = round_to_projection(&op, params)?;
            println!("rank={} distance={:e}", rounded.rank, rounded.distance);
            let mut rep = Report::new("quantk round", eff, None);
            rep.set("rank", rounded.rank);
            rep.set("distance", rounded.distance);
            rep.file("projection.coo", rounded.projection.to_coo());
            Ok(rep)
        }
        QuantkCmd::Index {
            space: input,
            count,
            seed,
        } => {
            positive("count", *count)?;
            let s = space(input)?;
            let spec = EnsembleSpec {
                gaussian: 0,
                adjacency_powers: false,
                permutations: *count,
                seed: *seed,
            };
            let mut worst = 0.0f64;
            for sample in sample_ensemble::<f64>(&s, s.diameter(), &spec) {
                let form = index_form(&sample.op)?;
                worst = worst.max(form.op.max_abs_diff(&unit_corner(&sample.op))?);
            }
            let exact = worst <= EXACT_TOL;
            println!("max_deviation={worst:e} exact={exact}");
            let mut rep = Report::new("quantk index", eff, Some(*seed));
            rep.set("count", count);
            rep.set("max_deviation", worst);
            rep.set("exact", exact);
            Ok(rep)
        }
        QuantkCmd::Path { cover, samples, seed } => {
            positive("samples", *samples)?;
            let c = covering(cover)?;
            let big = c.injectivity_radius();
            let window = LiftWindow::new(&c, big)?;
            let q = c.target_group().expect("quotient covering").arc_space();
            let props: Vec<Dist> = (0..*samples)
                .map(|j| big - (big as usize * j / *samples) as Dist)
                .collect();
            let ops: Vec<Operator> = props
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let spec = EnsembleSpec {
                        gaussian: 1,
                        adjacency_powers: false,
                        permutations: 0,
                        seed: seed.wrapping_mul(1_000_003).wrapping_add(j as u64),
                    };
                    sample_ensemble::<f64>(&q, p, &spec).remove(0).op
                })
                .collect();
            let times = (0..*samples).map(|j| j as f64).collect();
            let path = LocalisationPath::new(times, ops, *props.last().expect("samples >= 1"))?;
            let lifted = lift_path(&path, &window, None)?;
            println!(
                "square_residual={:e} source_sup={} lifted_sup={}",
                lifted.square_residual, lifted.source_sup_norm, lifted.lifted_sup_norm
            );
            let mut rep = Report::new("quantk path", eff, Some(*seed));
            rep.set("window", big);
            rep.set("propagations", props);
            rep.set("square_residual", lifted.square_residual);
            rep.set("source_sup_norm", lifted.source_sup_norm);
            rep.set("lifted_sup_norm", lifted.lifted_sup_norm);
            Ok(rep)
        }
        QuantkCmd::Records {
            d,
            r,
            eps,
            factor,
            eps_factor,
            probe,
        } => {
            quarter("eps", *eps)?;
            ensure(d.len() == r.len(), || "--d and --r need equal lengths".into())?;
            ensure(*eps_factor > 0.0, || "eps-factor must be positive".into())?;
            let oracle = LinearOracle {
                factor: *factor,
                eps_factor: *eps_factor,
            };
            let table = qs_qi_records(&oracle, d, r, *eps, probe)?;
            print!("{}", table.to_csv());
            println!("qs {:?} qi {:?} valid {}", table.qs_verdict, table.qi_verdict, table.valid);
            let mut rep = Report::new("quantk records", eff, None);
            rep.set("table", &table);
            rep.file("controls.csv", table.to_csv());
            Ok(rep)
        }
    }
}

fn rd_cmd(cmd: &RdCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        RdCmd::Estimate {
            group: g,
            radius,
            count,
            terms,
            s,
            seed,
        } => {
            positive("count", *count)?;
            positive("terms", *terms)?;
            ensure(*s >= 0.0, || format!("s = {s} must be nonnegative"))?;
            let q = group(g)?;
            let els = sample_elements(&q, *radius, *count, *terms, *seed)?;
            let rep = rd_constant_estimate(&els, &q, *s, &LengthFunction::word(&q), Some(*seed))?;
            println!("constant={}", rep.constant);
            let mut r = Report::new("rd estimate", eff, Some(*seed));
            r.set("constant", rep.constant);
            r.set("s", rep.s);
            r.set("skipped_zero", rep.skipped_zero);
            r.set("evidence", &rep.evidence);
            r.file("rd.csv", rep.to_csv());
            Ok(r)
        }
        RdCmd::Isometry { cover, count, s, seed } => {
            positive("count", *count)?;
            ensure(*s >= 0.0, || format!("s = {s} must be nonnegative"))?;
            let c = covering(cover)?;
            let big = c.injectivity_radius();
            let window = LiftWindow::new(&c, big)?;
            let q = c.target_group().expect("quotient covering");
            let els = sample_elements(q.as_ref(), big, *count, 6, *seed)?;
            let mut worst = 0.0f64;
            for a in &els {
                worst = worst.max(lift_isometry_check(a, &window, *s)?.residual);
            }
            println!("max_residual={worst:e}");
            let mut r = Report::new("rd isometry", eff, Some(*seed));
            r.set("window", big);
            r.set("count", count);
            r.set("max_residual", worst);
            Ok(r)
        }
    }
}

fn schedule_report(name: &str, eff: &str, s: &Schedule) -> Report {
    println!("stages={}", s.stages.len());
    println!(
        "profile={}",
        s.profile.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    );
    if let Some(short) = &s.shortfall {
        println!(
            "shortfall at stage {}: need girth above {}",
            short.stage, short.needed_girth_above
        );
    }
    let mut r = Report::new(name, eff, None);
    r.set("stage_count", s.stages.len());
    r.set("profile", &s.profile);
    r.set("selected_graphs", &s.selected_graphs);
    r.set("shortfall", &s.shortfall);
    r.set("assumption", &s.assumption);
    r.set("oracle_inputs", &s.oracle_inputs);
    let mut stages = serde_json::to_string_pretty(&s.stages).expect("plain data");
    stages.push('\n');
    r.file("stages.json", stages);
    r
}

fn stub_oracle(o: &OracleArgs) -> CliResult<LinearOracle> {
    quarter("eps0", o.eps0)?;
    ensure(o.gap > 1.0, || format!("gap = {} must exceed 1", o.gap))?;
    ensure(o.factor >= 1, || "factor must be at least 1".into())?;
    ensure(o.eps_factor > 0.0 && o.eps_factor <= 1.0, || "eps-factor must lie in (0, 1]".into())?;
    Ok(LinearOracle {
        factor: o.factor,
        eps_factor: o.eps_factor,
    })
}

fn sc_cmd(cmd: &ScCmd, eff: &str) -> CliResult<Report> {
    match cmd {
        ScCmd::Pieces { input } => {
            let p = Presentation::parse(&read_file(input)?)?;
            let t = compute_pieces(&p.relators)?;
            let rows: Vec<String> = p
                .relators
                .iter()
                .enumerate()
                .map(|(i, w)| format!("{i},{w},{},{}", w.len(), t.max_piece[i]))
                .collect();
            for row in &rows {
                println!("{}", row.replace(',', " "));
            }
            let mut r = Report::new("sc pieces", eff, None);
            r.set("max_piece", &t.max_piece);
            r.set("occurrences", &t.occurrences);
            let (csv, _) = csv_dat("relator,word,length,max_piece", &rows);
            r.file("pieces.csv", csv);
            Ok(r)
        }
        ScCmd::Condition { input, which } => {
            let condition = match (which.metric, which.pieces) {
                (Some(l), _) => {
                    in_unit("metric", l)?;
                    Condition::Metric { lambda: l }
                }
                (_, Some(p)) => {
                    ensure(p >= 2, || "pieces must be at least 2".into())?;
                    Condition::Pieces { p }
                }
                _ => unreachable!("clap requires one"),
            };
            let p = Presentation::parse(&read_file(input)?)?;
            let rep = check_condition(&p.relators, condition)?;
            println!("{}", if rep.holds { "holds" } else { "fails" });
            for w in &rep.witnesses {
                println!("relator {} value {} bound {}", w.relator, w.value, w.bound);
            }
            let mut r = Report::new("sc condition", eff, None);
            r.set("report", &rep);
            Ok(r)
        }
        ScCmd::Relators { graph, cap } => {
            let g = LabelledGraph::from_json(&read_file(graph)?)?;
            let cap = match (cap, g.girth()) {
                (Some(c), _) => *c,
                (None, Some(gi)) => gi,
                (None, None) => 0,
            };
            let rels = relators_from_graph(&g, cap)?;
            let words: Vec<String> = rels.relators.iter().map(|x| x.word.to_string()).collect();
            for w in &words {
                println!("{w}");
            }
            if let Some(note) = &rels.note {
                eprintln!("note: {note}");
            }
            let mut r = Report::new("sc relators", eff, None);
            r.set("relators", &rels);
            r.file("relators.txt", words.iter().map(|w| format!("{w}\n")).collect());
            Ok(r)
        }
        ScCmd::Schedule {
            source,
            r0,
            oracle,
            stages,
        } => {
            let stub = stub_oracle(oracle)?;
            let lengths: Vec<u64> = match (&source.lengths, source.powers) {
                (Some(path), _) => read_file(path)?
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| CliError::Input(format!("'{t}' is not a length"))))
                    .collect::<CliResult<_>>()?,
                (_, Some(k)) => {
                    ensure(k <= 62, || "powers must be at most 62".into())?;
                    (1..=k).map(|i| 1u64 << i).collect()
                }
                _ => unreachable!("clap requires one"),
            };
            let s = schedule_general(&lengths, &stub, *r0, oracle.eps0, oracle.gap, *stages)?;
            Ok(schedule_report("sc schedule", eff, &s))
        }
        ScCmd::Graphs { source, oracle, extra } => {
            let stub = stub_oracle(oracle)?;
            let graphs: Vec<LabelledGraph> = if source.graphs.is_empty() {
                source
                    .cycle_powers
                    .iter()
                    .map(|&k| {
                        ensure((1..=16).contains(&k), || "cycle powers must be 1..=16".into())?;
                        Ok(LabelledGraph::cycle(1 << k, &[1, 2])?)
                    })
                    .collect::<CliResult<_>>()?
            } else {
                source
                    .graphs
                    .iter()
                    .map(|p| Ok(LabelledGraph::from_json(&read_file(p)?)?))
                    .collect::<CliResult<_>>()?
            };
            let s = schedule_from_graphs(&graphs, &stub, oracle.eps0, oracle.gap, *extra)?;
            Ok(schedule_report("sc graphs", eff, &s))
        }
        ScCmd::Lacunarity { profile, deltas } => {
            ensure(profile.len() == deltas.len(), || "--profile and --deltas need equal lengths".into())?;
            let rep = lacunarity_check(profile, deltas)?;
            println!("verdict {:?}", rep.verdict);
            let mut r = Report::new("sc lacunarity", eff, None);
            r.set("report", &rep);
            Ok(r)
        }
    }
}
