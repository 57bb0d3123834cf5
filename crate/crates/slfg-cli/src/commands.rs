use std::path::Path;

use anyhow::{bail, Context, Result};
use slfg_core::eval::{load_dataset, run_eval};
use slfg_core::frames::{ingest_video, synthesize_manifest};
use slfg_core::indexing::load_or_build_index;
use slfg_core::inference::{ask, plan_question};
use slfg_core::{
    AnswerOption, HttpGateway, LedgerCounts, MockGateway, ModelGateway, PipelineConfig, PromptSet,
};

use crate::layers::{mock_fixtures_path, resolve_config};
use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli.overrides)?;
    let prompts = PromptSet::load(&config.prompts)?;

    match &cli.command {
        Command::Ingest {
            input,
            out,
            video_id,
        } => cmd_ingest(&config, input, out.as_deref(), video_id.as_deref()),
        Command::Index { video_id } => {
            if cli.overrides.dry_run {
                return print_resolved_config(&config);
            }
            let gateway = make_gateway(&cli, &config, &prompts)?;
            cmd_index(&config, &prompts, gateway.as_ref(), video_id)
        }
        Command::Ask {
            video_id,
            question,
            options,
        } => {
            let gateway = make_gateway(&cli, &config, &prompts)?;
            cmd_ask(
                &config,
                &prompts,
                gateway.as_ref(),
                video_id,
                question,
                options,
                cli.overrides.dry_run,
            )
        }
        Command::Eval { dataset, out_dir } => {
            let gateway = make_gateway(&cli, &config, &prompts)?;
            cmd_eval(
                &config,
                &prompts,
                gateway.as_ref(),
                dataset,
                out_dir.as_deref().unwrap_or(Path::new(".")),
                cli.overrides.dry_run,
            )
        }
        Command::Inspect { video_id, question } => {
            let gateway = make_gateway(&cli, &config, &prompts)?;
            cmd_inspect(
                &config,
                &prompts,
                gateway.as_ref(),
                video_id,
                question.as_deref(),
            )
        }
    }
}

fn make_gateway(
    cli: &Cli,
    config: &PipelineConfig,
    prompts: &PromptSet,
) -> Result<Box<dyn ModelGateway>> {
    if cli.overrides.mock {
        let gateway = match mock_fixtures_path(&cli.overrides) {
            Some(path) => MockGateway::from_fixture_file(&path)?,
            None => MockGateway::new(),
        };
        Ok(Box::new(gateway))
    } else {
        let e = config.endpoints.clone();
        Ok(Box::new(HttpGateway::new(
            e.describer,
            e.abstractor,
            e.embedder,
            e.answerer,
            prompts.clone(),
        )?))
    }
}

fn print_resolved_config(config: &PipelineConfig) -> Result<()> {
    println!("# resolved configuration (dry run, nothing executed)");
    print!("{}", toml::to_string_pretty(config)?);
    Ok(())
}

fn cmd_ingest(
    config: &PipelineConfig,
    input: &Path,
    out: Option<&Path>,
    video_id: Option<&str>,
) -> Result<()> {
    let video_id = match video_id {
        Some(id) => id.to_string(),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .context("cannot derive a video id from the input path; pass --video-id")?,
    };
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.frames_root.join(&video_id));

    let dir = if input.is_dir() {
        if out_dir != input {
            copy_frames(input, &out_dir)?;
        }
        synthesize_manifest(&out_dir, &video_id, Some(config.sampling.interval_s()))?
    } else {
        ingest_video(input, &out_dir, &video_id, config.sampling.interval_s())?
    };

    println!("frame directory: {}", dir.root().display());
    println!("video id:        {}", dir.video_id());
    println!("frames:          {}", dir.manifest().frames.len());
    println!("duration:        {}s", dir.manifest().duration_s);
    println!("interval:        {}s", dir.manifest().interval_s);
    Ok(())
}

fn copy_frames(from: &Path, to: &Path) -> Result<()> {
    std::fs::create_dir_all(to)?;
    let mut copied = 0;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("frame_") && name.ends_with(".jpg") {
            std::fs::copy(entry.path(), to.join(&name))?;
            copied += 1;
        }
    }
    if copied == 0 {
        bail!("no frame_*.jpg files found in {}", from.display());
    }
    Ok(())
}

fn cmd_index(
    config: &PipelineConfig,
    prompts: &PromptSet,
    gateway: &dyn ModelGateway,
    video_id: &str,
) -> Result<()> {
    let (index, cache_hit) = load_or_build_index(
        &config.frames_root,
        video_id,
        &config.sampling,
        config.group_size,
        gateway,
        prompts,
        &config.index_root,
    )?;
    let path = index.key().path_under(&config.index_root);
    println!("index:    {}", path.display());
    println!("source:   {}", if cache_hit { "cache" } else { "built" });
    println!("groups:   {}", index.groups.len());
    println!("scenes:   {}", index.scenes.len());
    println!("interval: {}s", index.sampling.interval_s());
    print_ledger(gateway.ledger().counts());
    Ok(())
}

fn parse_options(raw: &[String]) -> Result<Vec<AnswerOption>> {
    if raw.is_empty() {
        bail!("ask needs at least two --option \"LABEL=TEXT\" arguments");
    }
    let mut options = Vec::with_capacity(raw.len());
    for item in raw {
        let Some((label, text)) = item.split_once('=') else {
            bail!("malformed --option {item:?}; expected LABEL=TEXT");
        };
        let label = label.trim();
        if label.len() != 1 {
            bail!("option label {label:?} must be a single letter A-F");
        }
        options.push(AnswerOption::new(
            label.chars().next().unwrap(),
            text.trim(),
        ));
    }
    Ok(options)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ask(
    config: &PipelineConfig,
    prompts: &PromptSet,
    gateway: &dyn ModelGateway,
    video_id: &str,
    question: &str,
    raw_options: &[String],
    dry_run: bool,
) -> Result<()> {
    if dry_run {
        let plan = plan_question(video_id, question, config, gateway, prompts)?;
        println!("dry run: selection plan only, no answer call");
        println!("query scene: {}", plan.query.text);
        print_score_table(&plan.scores, &plan.index);
        print_plan(&plan.plan, Some(&plan.index));
        print_ledger(gateway.ledger().counts());
        return Ok(());
    }
    let options = parse_options(raw_options)?;
    let answer = ask(video_id, question, &options, config, gateway, prompts)?;

    println!("choice:          {}", answer.choice);
    println!("query scene:     {}", answer.query_scene);
    print_plan(&answer.plan, None);
    println!(
        "frame span:      {}s..{}s",
        answer
            .plan
            .final_frames
            .first()
            .map(|f| f.timestamp_ms / 1000)
            .unwrap_or(0),
        answer
            .plan
            .final_frames
            .last()
            .map(|f| f.timestamp_ms / 1000)
            .unwrap_or(0)
    );
    println!("index cache hit: {}", answer.index_cache_hit);
    println!(
        "timings:         index {:.3}s, localize {:.3}s, select {:.3}s, answer {:.3}s",
        answer.timings.index, answer.timings.localize, answer.timings.select, answer.timings.answer
    );
    println!("model reply:     {}", answer.raw_text.trim());
    print_ledger(gateway.ledger().counts());
    Ok(())
}

fn cmd_eval(
    config: &PipelineConfig,
    prompts: &PromptSet,
    gateway: &dyn ModelGateway,
    dataset: &Path,
    out_dir: &Path,
    dry_run: bool,
) -> Result<()> {
    let records = load_dataset(dataset)?;
    println!("loaded {} records from {}", records.len(), dataset.display());

    if dry_run {
        println!("dry run: planning every record, no answer calls");
        for (i, record) in records.iter().enumerate() {
            let plan = plan_question(&record.video_id, &record.question, config, gateway, prompts)?;
            println!(
                "record {:>3} video {} -> groups {:?}, {} frames",
                i,
                record.video_id,
                plan.plan.selected,
                plan.plan.final_frames.len()
            );
        }
        print_ledger(gateway.ledger().counts());
        return Ok(());
    }

    let report = run_eval(&records, config, gateway, prompts)?;
    std::fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("report.json");
    let text_path = out_dir.join("report.txt");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    std::fs::write(&text_path, report.render_text())?;

    print!("{}", report.render_text());
    print_ledger(gateway.ledger().counts());
    println!("wrote {}", json_path.display());
    println!("wrote {}", text_path.display());
    Ok(())
}

fn cmd_inspect(
    config: &PipelineConfig,
    prompts: &PromptSet,
    gateway: &dyn ModelGateway,
    video_id: &str,
    question: Option<&str>,
) -> Result<()> {
    let (index, cache_hit) = load_or_build_index(
        &config.frames_root,
        video_id,
        &config.sampling,
        config.group_size,
        gateway,
        prompts,
        &config.index_root,
    )?;
    println!(
        "video {}: duration {}s, interval {}s, group size {}, {} groups, {} scenes ({})",
        index.video_id,
        index.duration_ms / 1000,
        index.sampling.interval_s(),
        index.group_size,
        index.groups.len(),
        index.scenes.len(),
        if cache_hit { "cached" } else { "built" },
    );
    let scenes_by_group = index.scenes_by_group();
    for group in &index.groups {
        println!(
            "group {:>3} [{:>5}s, {:>5}s) {:>3} frames",
            group.group_index,
            group.start_ms / 1000,
            group.end_ms / 1000,
            group.frame_count()
        );
        for scene in &scenes_by_group[group.group_index] {
            println!("    scene {}.{}: {}", scene.group_index, scene.scene_index, scene.text);
        }
    }

    if let Some(question) = question {
        let query =
            slfg_core::extract_query_scene(video_id, question, gateway, prompts)?;
        let scores = slfg_core::score_all(&index, &query)?;
        println!("\nquestion:     {question}");
        println!("query scene:  {}", query.text);
        print_score_table(&scores, &index);
    }
    Ok(())
}

fn print_score_table(scores: &[slfg_core::GroupScore], index: &slfg_core::SceneIndex) {
    println!(
        "{:>4} {:>5} {:>16} {:>8} {:>9} {:>10}",
        "rank", "group", "window", "score", "raw_cos", "best_scene"
    );
    for (rank, s) in scores.iter().enumerate() {
        let window = index
            .groups
            .get(s.group_index)
            .map(|g| format!("{}s..{}s", g.start_ms / 1000, g.end_ms / 1000))
            .unwrap_or_default();
        println!(
            "{:>4} {:>5} {:>16} {:>8.4} {:>9.4} {:>10}",
            rank + 1,
            s.group_index,
            window,
            s.score,
            s.raw_cosine,
            s.best_scene_index
        );
    }
}

fn print_plan(plan: &slfg_core::SelectionPlan, index: Option<&slfg_core::SceneIndex>) {
    println!("selected groups: {:?}", plan.selected);
    for (i, &g) in plan.selected.iter().enumerate() {
        let (before, after) = &plan.extension_timestamps[i];
        let window = index
            .and_then(|idx| idx.groups.get(g))
            .map(|grp| format!("[{}s, {}s) ", grp.start_ms / 1000, grp.end_ms / 1000))
            .unwrap_or_default();
        println!(
            "  group {:>3} {}base {:>2} extra {:>2} (before {:?}, after {:?})",
            g,
            window,
            plan.base_frames_per_group[i],
            plan.extensions[i],
            before.iter().map(|t| t / 1000).collect::<Vec<_>>(),
            after.iter().map(|t| t / 1000).collect::<Vec<_>>(),
        );
    }
    println!("over budget:     {}", plan.over_budget);
    println!("frames sent:     {}", plan.final_frames.len());
}

fn print_ledger(counts: LedgerCounts) {
    println!(
        "model calls:     describe={} abstract={} extract={} embed={} answer={}",
        counts.describe_calls,
        counts.abstract_calls,
        counts.extract_calls,
        counts.embed_calls,
        counts.answer_calls
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_parsing() {
        let parsed = parse_options(&[
            "A=first thing".to_string(),
            "b = second thing".to_string(),
        ])
        .unwrap();
        assert_eq!(parsed[0], AnswerOption::new('A', "first thing"));
        assert_eq!(parsed[1], AnswerOption::new('B', "second thing"));

        assert!(parse_options(&[]).is_err());
        assert!(parse_options(&["no-separator".to_string()]).is_err());
        assert!(parse_options(&["AB=text".to_string()]).is_err());
    }
}
