"""
Master Pipeline Engine
Human + robot demonstrations -> unified dataset -> co-trained policy -> benchmark score

THE MASTER PIPELINE (5 Steps + experiments):
STEP 1: Generate scripted demonstrations (robot + human logs)      gen-bench
STEP 2: Ingest raw logs -> time-aligned episodes                   ingest
STEP 3: Align episodes -> normalized chunk dataset on disk         build-dataset / stats
STEP 4: Co-train the dual-head policy -> checkpoint                train
STEP 5: Closed-loop evaluation on the benchmark                    eval
EXPERIMENTS: robot x human budget sweep, ablations                 scale-sweep / ablate
RENDERING: mask + red-line overlay frames for both embodiments     render-overlay

Usage:
    python master_pipeline_engine.py gen-bench --out runs/demo --robot-min 10 --human-min 40
    python master_pipeline_engine.py build-dataset --out runs/demo
    python master_pipeline_engine.py train --out runs/demo --iterations 2000
    python master_pipeline_engine.py eval --out runs/demo --episodes 5
"""

import argparse
import dataclasses
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from action_alignment_module import AlignedDataset, build_dataset, normalized_overlap_report
from benchmark_env import (
    BenchmarkEnv,
    EmbodimentSpec,
    EvalResult,
    ExpertChunkPolicy,
    ExpertDemo,
    evaluate,
    scripted_expert,
)
from cotrain_policy_model import TrainResult, load_checkpoint, save_checkpoint, train_on_dataset
from dataset_store import load_dataset
from kinematics_module import (
    ArmModel,
    MaskPrompt,
    apply_overlay,
    blank_frame,
    hand_prompt,
    robot_prompt,
    save_png,
)
from log_ingest_processor import HUMAN, ROBOT, Episode, IngestProcessor
from model_performance.results_logger import log_eval_result
from model_performance.save_results_helper import format_eval_result, save_results
from model_performance.sweep_plotter import plot_ablation, plot_scale_sweep
from model_performance.trend_analyzer import TrendAnalyzer
from pipeline_errors import ConfigError, DatasetCorrupt, PipelineError
from run_config import DEFAULT_RUN_INI, RunConfig
from se3_geometry import CameraModel, look_at, project
from segmentation_service.segmentation_client import HttpSegmentationClient, StubSegmentationClient

COMMANDS = ('gen-bench', 'ingest', 'build-dataset', 'stats', 'train', 'eval',
            'scale-sweep', 'ablate', 'render-overlay')

CHECKPOINT_STEM = 'policy'
SWEEP_COLUMNS = ['label', 'robot_minutes', 'human_minutes', 'seed', 'mean_score', 'std_score',
                 'episodes', 'final_loss', 'stats_hash']


class MasterPipelineEngine:
    """
    Runs the demonstration -> dataset -> policy -> score pipeline from one RunConfig
    """

    # Demonstration seed layout: data seed blocks, human seeds offset inside a block
    SEED_BLOCK = 100_000
    HUMAN_SEED_OFFSET = 50_000

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.cfg = config
        self.verbose = verbose
        self.arm = ArmModel.from_ini(config.paths.arm_path)
        self.ingest = IngestProcessor(verbose=verbose)

        if verbose:
            print("✓ Master Pipeline Engine initialized")
            print(f"  - Config: {config.source or 'built-in defaults'}")
            print(f"  - Arm chain: {config.paths.arm_path} ({self.arm.dof} joints incl. gripper)")
            print(f"  - Chunk size {config.align.chunk_size}, horizons "
                  f"{config.align.robot_horizon_s}s robot / {config.align.human_horizon_s}s human\n")

    def _say(self, text: str) -> None:
        if self.verbose:
            print(text)

    def demo_seeds(self, embodiment: str, count: int, data_seed: int) -> List[int]:
        base = data_seed * self.SEED_BLOCK + (self.HUMAN_SEED_OFFSET if embodiment == HUMAN else 0)
        return [base + i for i in range(count)]

    # -------------------------------------------------------------------------
    # STEP 1
    # -------------------------------------------------------------------------
    def step_1_generate_demos(self, robot_minutes: float, human_minutes: float, data_seed: int,
                              raw_dir: Optional[str] = None) -> Dict[str, List[ExpertDemo]]:
        """
        Generate scripted demonstrations for the given budgets

        Args:
            robot_minutes / human_minutes: simulated demonstration time
            data_seed: seed block of the demonstrations
            raw_dir: when given, logs are written as `<source_id>_<log>.csv`

        Returns:
            {'robot': [...], 'human': [...]} ExpertDemo lists
        """
        bench = self.cfg.bench
        counts = {ROBOT: self.cfg.gen.episodes(robot_minutes, bench.episode_s),
                  HUMAN: self.cfg.gen.episodes(human_minutes, bench.episode_s)}
        self._say(f"  [STEP 1] Generating demonstrations: {counts[ROBOT]} robot + "
                  f"{counts[HUMAN]} human episodes of {bench.episode_s:g}s (data seed {data_seed})...")

        demos: Dict[str, List[ExpertDemo]] = {}
        for emb in (ROBOT, HUMAN):
            spec = EmbodimentSpec.robot(bench) if emb == ROBOT else EmbodimentSpec.human(bench)
            demos[emb] = [scripted_expert(spec, seed=s, bench=bench, arm=self.arm)
                          for s in self.demo_seeds(emb, counts[emb], data_seed)]
            if demos[emb]:
                scores = [d.score for d in demos[emb]]
                self._say(f"    ✓ {emb}: {len(scores)} episode(s), expert score "
                          f"{np.mean(scores):.2f} ± {np.std(scores):.2f} per episode")

        if raw_dir is not None:
            for emb in (ROBOT, HUMAN):
                for demo in demos[emb]:
                    demo.write(raw_dir, demo.meta['source_id'])
            index = {'robot_minutes': robot_minutes, 'human_minutes': human_minutes,
                     'data_seed': data_seed,
                     'episodes': {emb: [d.meta['source_id'] for d in demos[emb]] for emb in demos}}
            save_results('gen_bench', index, self.cfg.to_dict(), raw_dir, verbose=self.verbose)
            self._say(f"    ✓ Logs written to {raw_dir}")
        return demos

    # -------------------------------------------------------------------------
    # STEP 2
    # -------------------------------------------------------------------------
    def step_2_ingest(self, raw_dir: str) -> List[Episode]:
        """
        Parse every `<stem>_meta.json` recording in raw_dir and time-align it

        Raises:
            DatasetCorrupt: no recordings found
            MalformedRow / ArityMismatch / ClockMismatch: with the file name attached
        """
        self._say(f"  [STEP 2] Ingesting raw logs from {raw_dir}...")
        metas = sorted(glob.glob(os.path.join(raw_dir, '*_meta.json')))
        if not metas:
            raise DatasetCorrupt(f"no recordings (*_meta.json) in {raw_dir}", file=raw_dir)

        episodes: List[Episode] = []
        for meta_path in metas:
            stem = meta_path[:-len('_meta.json')]
            with open(meta_path) as f:
                meta = json.load(f)
            source_id = meta.get('source_id', os.path.basename(stem))
            if meta['embodiment'] == ROBOT:
                files = {'robot': stem + '_robot.csv', 'scene': stem + '_scene.csv'}
            else:
                files = {'device': stem + '_device.csv', 'hand': stem + '_hand.csv',
                         'scene': stem + '_scene.csv'}
            texts = {}
            for name, path in files.items():
                if name == 'scene' and not os.path.exists(path):
                    continue
                with open(path) as f:
                    texts[name] = f.read()
            try:
                if meta['embodiment'] == ROBOT:
                    parsed = self.ingest.parse_robot_log(texts['robot'], texts.get('scene'), source_id)
                else:
                    parsed = self.ingest.parse_human_log(texts['device'], texts['hand'], texts.get('scene'),
                                                         source_id=source_id)
            except PipelineError as e:
                e.context.setdefault('file', files.get('robot', files.get('device')))
                raise
            for ep in parsed:
                ep.meta.update({'seed': meta.get('seed'), 'expert_score': meta.get('score')})
                episodes.append(self.ingest.time_align(ep))

        counts = {emb: sum(1 for e in episodes if e.embodiment == emb) for emb in (ROBOT, HUMAN)}
        samples = {emb: sum(len(e) for e in episodes if e.embodiment == emb) for emb in (ROBOT, HUMAN)}
        self._say(f"    ✓ Robot episodes: {counts[ROBOT]} ({samples[ROBOT]} samples)")
        self._say(f"    ✓ Human episodes: {counts[HUMAN]} ({samples[HUMAN]} samples)")
        return episodes

    # -------------------------------------------------------------------------
    # STEP 3
    # -------------------------------------------------------------------------
    def step_3_build_dataset(self, episodes: Sequence[Episode], out_dir: Optional[str] = None,
                             align=None) -> AlignedDataset:
        align = align or self.cfg.align
        self._say(f"  [STEP 3] Building dataset from {len(episodes)} episode(s) "
                  f"(stride {align.stride}, action norm {'on' if align.action_norm else 'off'})...")
        dataset = build_dataset(episodes, align, out_dir=out_dir, verbose=self.verbose)
        self._say(f"    ✓ Stats hash: {dataset.stats_hash[:16]}")
        if out_dir is not None:
            self._say(f"    ✓ Dataset written to {out_dir}")
        return dataset

    # -------------------------------------------------------------------------
    # STEP 4
    # -------------------------------------------------------------------------
    def step_4_train(self, dataset: AlignedDataset, train_cfg=None,
                     checkpoint_dir: Optional[str] = None) -> TrainResult:
        train_cfg = train_cfg or self.cfg.train
        self._say(f"  [STEP 4] Co-training for {train_cfg.iterations} iterations "
                  f"({train_cfg.optimizer}, lr {train_cfg.learning_rate}, seed {train_cfg.seed}, "
                  f"human data {'on' if train_cfg.use_human else 'off'})...")
        result = train_on_dataset(dataset, train_cfg, verbose=self.verbose)
        self._say(f"    ✓ Final loss: {result.final_loss:.6f}")
        if checkpoint_dir is not None:
            path = save_checkpoint(result.params, os.path.join(checkpoint_dir, CHECKPOINT_STEM))
            self._say(f"    ✓ Checkpoint: {path}")
        return result

    # -------------------------------------------------------------------------
    # STEP 5
    # -------------------------------------------------------------------------
    def step_5_evaluate(self, policy, dataset: Optional[AlignedDataset] = None,
                        n_episodes: Optional[int] = None) -> EvalResult:
        """
        Args:
            policy: PolicyParams (robot stats taken from `dataset`) or a ChunkPolicy
        """
        bench = self.cfg.bench
        count = bench.eval_episodes if n_episodes is None else n_episodes
        self._say(f"  [STEP 5] Evaluating over {count} episode(s) from seed {bench.eval_seed}...")
        stats = dataset.stats.get(ROBOT) if dataset is not None else None
        horizon = dataset.config.robot_horizon_s if dataset is not None else self.cfg.align.robot_horizon_s
        result = evaluate(policy, count, bench=bench, arm=self.arm, stats=stats, horizon_s=horizon,
                          workers=self.cfg.sweep.workers)
        self._say(f"    ✓ Mean score: {result.mean:.2f} ± {result.stderr:.2f} "
                  f"(per seed: {list(result.scores.values())})")
        return result

    # -------------------------------------------------------------------------
    # Experiments
    # -------------------------------------------------------------------------
    def run_cell(self, demos: Dict[str, List[ExpertDemo]], robot_minutes: float, human_minutes: float,
                 seed: int, label: str, use_human: bool = True, action_norm: bool = True,
                 stride: Optional[int] = None) -> Dict:
        """
        Train and evaluate one (budget, seed, variant) cell on prefixes of `demos`

        Returns:
            row dict with label, budgets, seed, mean/std score, final loss and stats hash
        """
        bench = self.cfg.bench
        n_robot = self.cfg.gen.episodes(robot_minutes, bench.episode_s)
        n_human = self.cfg.gen.episodes(human_minutes, bench.episode_s) if use_human else 0
        episodes = [ep for d in demos[ROBOT][:n_robot] for ep in d.episodes]
        episodes += [ep for d in demos[HUMAN][:n_human] for ep in d.episodes]
        align = dataclasses.replace(self.cfg.align, action_norm=action_norm,
                                    stride=self.cfg.align.stride if stride is None else stride)
        train_cfg = dataclasses.replace(self.cfg.train, seed=int(seed), use_human=use_human and n_human > 0)

        dataset = build_dataset(episodes, align)
        result = train_on_dataset(dataset, train_cfg)
        scores = evaluate(result.params, bench=bench, arm=self.arm, stats=dataset.stats[ROBOT],
                          horizon_s=align.robot_horizon_s)
        row = format_eval_result(label, scores, robot_minutes, human_minutes if n_human else 0.0,
                                 seed, dataset.stats_hash)
        row['final_loss'] = result.final_loss
        self._say(f"    ✓ {label:<14} R={robot_minutes:g}m H={row['human_minutes']:g}m seed {seed}: "
                  f"score {row['mean_score']:.2f} (loss {row['final_loss']:.5f})")
        return row

    def _run_cells(self, jobs: List[Dict]) -> List[Dict]:
        workers = max(int(self.cfg.sweep.workers), 1)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda job: self.run_cell(**job), jobs))
        return [self.run_cell(**job) for job in jobs]

    def scale_sweep(self, results_dir: str) -> pd.DataFrame:
        """Grid over {robot minutes} x {human minutes}, several data/train seeds per cell"""
        sweep = self.cfg.sweep
        print(f"\n{'=' * 80}")
        print(f"SCALE SWEEP: robot {list(sweep.robot_minutes)} min x human {list(sweep.human_minutes)} min, "
              f"{sweep.seeds} seed(s)")
        print(f"{'=' * 80}\n")
        rows = []
        for k in range(sweep.seeds):
            demos = self.step_1_generate_demos(max(sweep.robot_minutes), max(sweep.human_minutes),
                                               self.cfg.gen.data_seed + k)
            jobs = [dict(demos=demos, robot_minutes=r, human_minutes=h, seed=self.cfg.train.seed + k,
                         label='cotrain' if h > 0 else 'robot_only', stride=sweep.stride)
                    for r in sweep.robot_minutes for h in sweep.human_minutes]
            rows.extend(self._run_cells(jobs))
        return self._write_table('scale_sweep', rows, results_dir, plot_scale_sweep)

    def ablate(self, results_dir: str) -> pd.DataFrame:
        """Co-training vs. robot-only vs. no action normalization at the gen-bench budgets"""
        gen, sweep = self.cfg.gen, self.cfg.sweep
        print(f"\n{'=' * 80}")
        print(f"ABLATIONS: R={gen.robot_minutes:g}m, H={gen.human_minutes:g}m, {sweep.seeds} seed(s)")
        print(f"{'=' * 80}\n")
        variants = (('cotrain', True, True), ('robot_only', False, True), ('no_action_norm', True, False))
        rows = []
        for k in range(sweep.seeds):
            demos = self.step_1_generate_demos(gen.robot_minutes, gen.human_minutes, gen.data_seed + k)
            jobs = [dict(demos=demos, robot_minutes=gen.robot_minutes, human_minutes=gen.human_minutes,
                         seed=self.cfg.train.seed + k, label=label, use_human=use_human,
                         action_norm=norm, stride=sweep.stride)
                    for label, use_human, norm in variants]
            rows.extend(self._run_cells(jobs))
        return self._write_table('ablation', rows, results_dir, plot_ablation)

    def _write_table(self, name: str, rows: List[Dict], results_dir: str, plotter) -> pd.DataFrame:
        table = pd.DataFrame(rows)[SWEEP_COLUMNS]
        os.makedirs(results_dir, exist_ok=True)
        table.to_csv(os.path.join(results_dir, f"{name}.csv"), index=False)
        svg = plotter(table, os.path.join(results_dir, f"{name}.svg"))
        command = 'scale-sweep' if name == 'scale_sweep' else 'ablate'
        ledger = os.path.join(results_dir, 'results_log.csv')
        for row in rows:
            log_eval_result({**row, 'command': command}, ledger, verbose=self.verbose)

        analyzer = TrendAnalyzer(table)
        summary = {'rows': rows, 'cells': analyzer.cells.to_dict(orient='records')}
        if name == 'scale_sweep':
            summary['scaling'] = analyzer.evaluate_scaling()
            summary['human_data_never_hurts'] = analyzer.human_data_never_hurts()
            print(analyzer.report())
        else:
            benefit = analyzer.evaluate_cotrain_benefit(self.cfg.gen.robot_minutes, self.cfg.gen.human_minutes,
                                                        'cotrain', 'robot_only')
            summary['cotrain_benefit'] = benefit
            print(f"{'✓' if benefit['passed'] else '⚠'} co-training benefit: {benefit['reason']}")
        save_results(name, summary, self.cfg.to_dict(), results_dir, verbose=self.verbose)
        print(f"✓ Table: {os.path.join(results_dir, name + '.csv')}")
        print(f"✓ Plot: {svg}")
        return table

    # -------------------------------------------------------------------------
    # Rendering
    # -------------------------------------------------------------------------
    def head_camera(self) -> CameraModel:
        bench = self.cfg.bench
        return CameraModel.from_params(bench.fx, bench.fy, bench.cx, bench.cy, bench.width, bench.height,
                                       look_at(bench.head_eye, bench.camera_target, bench.camera_up))

    def render_overlays(self, out_dir: str, seed: int, segmenter_url: Optional[str] = None) -> Dict[str, str]:
        """
        Render one masked frame per embodiment at the seeded initial placement

        Robot: arm keypoints -> segmentation -> black mask + gripper-to-forearm line.
        Human: hand point -> segmentation -> contour box -> box-diagonal line.
        """
        client = HttpSegmentationClient(segmenter_url, verbose=self.verbose) if segmenter_url \
            else StubSegmentationClient()
        bench = self.cfg.bench
        self._say(f"  Rendering overlays (seed {seed}, segmenter "
                  f"{segmenter_url or 'offline stub'})...")

        env = BenchmarkEnv(bench, self.arm, ROBOT)
        world = env.reset(seed)
        cam = bench.robot_camera()
        frame = blank_frame(cam)
        prompt = robot_prompt(self.arm, world.joints, cam)
        robot_image = apply_overlay(client.segment(frame, prompt), prompt.line_segment_px, frame)

        head = self.head_camera()
        hand_world = world.gripper_pos + np.asarray(bench.human_offset_m)
        hand_px = project(head, hand_world)
        seed_prompt = MaskPrompt(hand_px[None, :], [hand_px, hand_px], HUMAN)
        frame = blank_frame(head)
        contour = client.segment(frame, seed_prompt)
        vs, us = np.nonzero(contour)
        box = (us.min(), vs.min(), us.max(), vs.max()) if us.size else (hand_px[0], hand_px[1], hand_px[0], hand_px[1])
        human = hand_prompt(box, hand_px, (head.width, head.height))
        human_image = apply_overlay(contour, human.line_segment_px, frame)

        paths = {'robot': save_png(robot_image, os.path.join(out_dir, 'overlay_robot.png')),
                 'human': save_png(human_image, os.path.join(out_dir, 'overlay_human.png'))}
        save_results('overlay_prompts', {'seed': seed, 'robot': prompt.to_dict(), 'human': human.to_dict()},
                     self.cfg.to_dict(), out_dir, verbose=self.verbose)
        for emb, path in paths.items():
            self._say(f"    ✓ {emb}: {path}")
        return paths


# -----------------------------------------------------------------------------
# Command line
# -----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='master_pipeline_engine',
                                     description='Human/robot demonstration co-training pipeline')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help=f"run config INI (default: {DEFAULT_RUN_INI})")
    common.add_argument('--seed', type=int, default=None, help='data and training seed')
    common.add_argument('--out', default=None, help='root directory for raw/, dataset/, checkpoints/, results/')
    common.add_argument('--robot-min', type=float, default=None, help='robot demonstration minutes')
    common.add_argument('--human-min', type=float, default=None, help='human demonstration minutes')
    common.add_argument('--iterations', type=int, default=None, help='training iterations')
    common.add_argument('--episodes', type=int, default=None, help='evaluation episodes')
    common.add_argument('--quiet', action='store_true', help='only print results and errors')

    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, parents=[common])
        if name == 'eval':
            cmd.add_argument('--expert', action='store_true', help='evaluate the scripted expert')
        if name == 'render-overlay':
            cmd.add_argument('--segmenter-url', default=None, help='segmentation service base URL')
    return parser


def run_command(args: argparse.Namespace) -> int:
    config_path = args.config if args.config is not None else DEFAULT_RUN_INI
    cfg = RunConfig.load(config_path, seed=args.seed, out=args.out, robot_min=args.robot_min,
                         human_min=args.human_min, iterations=args.iterations, episodes=args.episodes)
    engine = MasterPipelineEngine(cfg, verbose=not args.quiet)
    paths = cfg.paths

    if args.command == 'gen-bench':
        engine.step_1_generate_demos(cfg.gen.robot_minutes, cfg.gen.human_minutes, cfg.gen.data_seed, paths.raw_dir)

    elif args.command == 'ingest':
        episodes = engine.step_2_ingest(paths.raw_dir)
        table = [{'source_id': e.source_id, 'embodiment': e.embodiment, 'arms': e.arms,
                  'samples': len(e), 'duration_s': e.duration} for e in episodes]
        save_results('ingest', {'episodes': table}, cfg.to_dict(), paths.results_dir, verbose=engine.verbose)

    elif args.command == 'build-dataset':
        episodes = engine.step_2_ingest(paths.raw_dir)
        dataset = engine.step_3_build_dataset(episodes, out_dir=paths.dataset_dir)
        for name, part in dataset.splits.items():
            for emb, split in part.items():
                print(f"{name} {emb}: {len(split)} samples")

    elif args.command == 'stats':
        dataset = load_dataset(paths.dataset_dir)
        report = normalized_overlap_report(dataset)
        print(f"\n{'=' * 80}\nDATASET STATISTICS ({paths.dataset_dir})\n{'=' * 80}")
        with np.printoptions(precision=4, suppress=True, linewidth=120):
            for emb, stats in dataset.stats.items():
                print(f"\n{emb} ({stats.sample_count} samples)")
                print(f"  proprio mean: {stats.proprio_mean}")
                print(f"  proprio std:  {stats.proprio_std}")
                print(f"  action mean:  {stats.action_mean}")
                print(f"  action std:   {stats.action_std}")
        if report['available']:
            print(f"\nPose-action mean gap between embodiments: raw {report['raw']['max_gap']:.4f}, "
                  f"normalized {report['normalized']['max_gap']:.4f}")
        else:
            print("\n⚠ Overlap diagnostic needs both embodiments in the train split")
        save_results('stats', {'stats': {e: s.to_dict() for e, s in dataset.stats.items()},
                               'overlap': report}, cfg.to_dict(), paths.results_dir, verbose=engine.verbose)

    elif args.command == 'train':
        dataset = load_dataset(paths.dataset_dir)
        result = engine.step_4_train(dataset, checkpoint_dir=paths.checkpoint_dir)
        os.makedirs(paths.results_dir, exist_ok=True)
        result.trace.to_csv(os.path.join(paths.results_dir, 'train_trace.csv'), index=False)
        save_results('train', {'final_loss': result.final_loss, 'iterations': len(result.trace),
                               'stats_hash': dataset.stats_hash}, cfg.to_dict(), paths.results_dir,
                     verbose=engine.verbose)
        print(f"final loss {result.final_loss:.6f}")

    elif args.command == 'eval':
        if args.expert:
            result = engine.step_5_evaluate(ExpertChunkPolicy())
            label, stats_hash = 'expert', None
        else:
            dataset = load_dataset(paths.dataset_dir)
            params = load_checkpoint(os.path.join(paths.checkpoint_dir, CHECKPOINT_STEM),
                                     expect_stats_hash=dataset.stats_hash)
            result = engine.step_5_evaluate(params, dataset)
            label, stats_hash = 'cotrain', dataset.stats_hash
        row = format_eval_result(label, result, cfg.gen.robot_minutes, cfg.gen.human_minutes,
                                 cfg.train.seed, stats_hash)
        log_eval_result({**row, 'command': 'eval'}, os.path.join(paths.results_dir, 'results_log.csv'),
                        verbose=engine.verbose)
        save_results('eval_expert' if args.expert else 'eval', row, cfg.to_dict(), paths.results_dir,
                     verbose=engine.verbose)
        print(f"{label} mean score {result.mean:.2f}")

    elif args.command == 'scale-sweep':
        engine.scale_sweep(paths.results_dir)

    elif args.command == 'ablate':
        engine.ablate(paths.results_dir)

    elif args.command == 'render-overlay':
        engine.render_overlays(paths.results_dir, cfg.gen.data_seed, args.segmenter_url)

    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point; returns the process exit code

    0 on success, 2 on configuration errors, 1 on any other pipeline or IO error.
    Failures print one `ERROR code=... message="..."` line to stderr.
    """
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except ConfigError as e:
        print(e.error_line(), file=sys.stderr)
        return 2
    except PipelineError as e:
        print(e.error_line(), file=sys.stderr)
        return 1
    except OSError as e:
        name = f" file={e.filename}" if getattr(e, 'filename', None) else ""
        print(f'ERROR code=IOError message="{e.strerror or e}"{name}', file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
