"""``vidmpc`` command line.

Exit codes: 0 success, 2 usage or bad input, 3 transport failure or
session abort, 4 malformed file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .containers import Role, ShareFile, load_share, load_tensor, save_share, save_tensor, share_path
from .errors import BudgetExhaustedError, ContainerFormatError, TransportError, VidMPCError
from .instances import random_instance, selection_demo
from .model import ModelSpec, full_model, random_weights, toy_model
from .oracle import oracle_classify, oracle_float_classify
from .party import PartyConfig, make_configs, run_party
from .plan import DEFAULT_PLAN
from .pipeline import classify_local, keystream_for, load_video, load_weights, to_ring, write_transcript
from .preproc import budget_for, dealer_generate
from .session import pairwise_keys
from .sharing import PARTIES, deal_tensor
from .transport import session_id_from
from .video import build_selection, reveal_label

log = logging.getLogger("vidmpc")

EXIT_OK, EXIT_USAGE, EXIT_TRANSPORT, EXIT_FORMAT = 0, 2, 3, 4
GB = 1e9


def _indices(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"indices must be comma-separated integers, got {text!r}")


def _write_shares(values: np.ndarray, out_dir, stem: str, role: Role, session: bytes, seed, force: bool) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [share_path(out_dir, stem, i) for i in PARTIES]
    existing = [p for p in paths if p.exists()]
    if existing and not force:
        raise FileExistsError(f"refusing to overwrite {existing[0]} (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, share in zip(paths, deal_tensor(values, keystream_for(seed), stem)):
        save_share(path, ShareFile(share, session, role))
    return paths


# ---------------------------------------------------------------------------
# commands


def cmd_toy(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.demo:
        inst = selection_demo()
    else:
        inst = random_instance(args.seed, frames=args.frames, selected=args.selected)
    inst.model.save(out / "model.json")
    save_tensor(out / "weights.mpct", inst.model.join_flat(inst.weights))
    save_tensor(out / "video.mpct", inst.video)
    print(f"wrote {out}/model.json, weights.mpct, video.mpct ({inst.model.n_params} parameters)")
    print(f"indices: {','.join(map(str, inst.indices))}")
    return EXIT_OK


def cmd_deal_video(args) -> int:
    video = load_video(args.input)
    for p in _write_shares(video, args.out, "video", Role.VIDEO, session_id_from(args.session), args.seed, args.force):
        print(p)
    return EXIT_OK


def cmd_deal_model(args) -> int:
    model = ModelSpec.load(args.manifest)
    weights = load_weights(args.weights, model)
    for p in _write_shares(weights, args.out, "weights", Role.WEIGHTS, session_id_from(args.session), args.seed, args.force):
        print(p)
    return EXIT_OK


def cmd_deal_selection(args) -> int:
    sel = build_selection(args.indices, args.frames)
    for p in _write_shares(sel, args.out, "selection", Role.SELECTION, session_id_from(args.session), args.seed, args.force):
        print(p)
    return EXIT_OK


def cmd_preproc(args) -> int:
    model = ModelSpec.load(args.budget_from)
    budget = budget_for(model, None, args.frames)
    print(json.dumps(budget.to_dict()))
    if args.out:
        seed = args.seed if args.seed is not None else os.urandom(16).hex()
        for p in dealer_generate(budget, seed, args.out, session_id_from(args.session)):
            log.info("wrote %s", p)
    return EXIT_OK


def cmd_configs(args) -> int:
    keys = pairwise_keys(args.seed) if args.seed is not None else None
    for p in make_configs(
        args.out,
        host=args.host,
        base_port=args.base_port,
        manifest=args.manifest,
        shares_dir=args.shares,
        preproc_dir=args.preproc,
        output_dir=args.output,
        timeout=args.timeout,
        keys=keys,
    ):
        print(p)
    return EXIT_OK


def cmd_party(args) -> int:
    cfg = PartyConfig.load(args.config)
    if args.timeout is not None:
        cfg.timeout = args.timeout
    out, transcript = run_party(cfg, session_id_from(args.session))
    if args.emit_transcript:
        write_transcript(args.emit_transcript, transcript)
    print(out)
    return EXIT_OK


def cmd_reveal(args) -> int:
    sid = session_id_from(args.session) if args.session else None
    shares = [load_share(p, role=Role.LABEL, session_id=sid).share for p in args.shares]
    print(reveal_label(shares))
    return EXIT_OK


def _plain_inputs(args):
    model = ModelSpec.load(args.model)
    return load_video(args.video), model, load_weights(args.weights, model)


def cmd_classify(args) -> int:
    if not args.local:
        print("classify runs in-process only (--local); use `party` for networked runs", file=sys.stderr)
        return EXIT_USAGE
    video, model, weights = _plain_inputs(args)
    result = classify_local(video, args.indices, model, weights, seed=args.seed, timeout=args.timeout)
    if args.emit_transcript:
        write_transcript(args.emit_transcript, result.transcript)
    if args.scores:
        print(json.dumps(_decode(result.scores)))
    print(result.label)
    return EXIT_OK


def _decode(words: np.ndarray) -> list[float]:
    return [round(v, 6) for v in DEFAULT_PLAN.codec.decode_array(words).tolist()]


def cmd_oracle(args) -> int:
    model = ModelSpec.load(args.model)
    if args.float:
        video = load_tensor(args.video).astype(np.float64)
        weights = model.split_flat(load_tensor(args.weights).astype(np.float64))
        label, sums = oracle_float_classify(video, args.indices, model, weights)
        scores = [round(float(v), 6) for v in sums]
    else:
        video, _, weights = _plain_inputs(args)
        label, sums = oracle_classify(video, args.indices, model, model.split_flat(weights))
        scores = _decode(sums.view(np.uint64))
    if args.scores:
        print(json.dumps(scores))
    print(label)
    return EXIT_OK


def cmd_bench(args) -> int:
    model = {"toy": toy_model, "full": full_model}.get(args.model)
    model = model() if model else ModelSpec.load(args.model)
    rng = np.random.default_rng(args.seed)
    video = rng.uniform(0.0, 1.0, (args.video_frames, *model.input_shape))
    weights = model.join_flat(random_weights(model, rng))
    indices = list(range(1, args.video_frames + 1))[: args.frames]
    if len(indices) < args.frames:
        raise ValueError(f"cannot select {args.frames} frames from {args.video_frames}")
    print(f"{'setting':<14}{'model':<10}{'frames':>7}{'time (s)':>11}{'comm (GB)':>11}  per party (GB)")
    for rep in range(args.repeat):
        res = classify_local(video, indices, model, to_ring(weights), seed=args.seed + rep)
        per = res.run.bytes_per_party()
        total = sum(per.values())
        per_txt = " ".join(f"P{i}={per[i] / GB:.4f}" for i in PARTIES)
        print(f"{'passive 3PC':<14}{args.model[:9]:<10}{len(indices):>7}{res.run.elapsed:>11.2f}{total / GB:>11.4f}  {per_txt}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vidmpc", description="Private video classification over three-party MPC.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def dealer(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--out", required=True, help="directory for the three share files")
        s.add_argument("--session", required=True, help="session id (32 hex chars or any label)")
        s.add_argument("--seed", type=int, default=None, help="deterministic dealing (testing only)")
        s.add_argument("--force", action="store_true", help="overwrite existing share files")
        return s

    s = sub.add_parser("toy", help="write a toy model, weights and video")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--frames", type=int, default=8)
    s.add_argument("--selected", type=int, default=4)
    s.add_argument("--demo", action="store_true", help="the 4-frame 2x2 selection example instead")
    s.set_defaults(fn=cmd_toy)

    s = dealer("deal-video", "secret-share a video tensor")
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(fn=cmd_deal_video)

    s = dealer("deal-model", "secret-share model weights")
    s.add_argument("--manifest", required=True)
    s.add_argument("--weights", required=True)
    s.set_defaults(fn=cmd_deal_model)

    s = dealer("deal-selection", "secret-share the one-hot frame selection")
    s.add_argument("--indices", type=_indices, required=True, help="1-based frame numbers, e.g. 2,4")
    s.add_argument("--frames", type=int, required=True, help="number of frames in the video")
    s.set_defaults(fn=cmd_deal_selection)

    s = sub.add_parser("preproc", help="print and optionally generate preprocessing material")
    s.add_argument("--budget-from", required=True, help="model manifest")
    s.add_argument("--frames", type=int, required=True, help="number of selected frames")
    s.add_argument("--out", help="directory for material files")
    s.add_argument("--session", default="default")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_preproc)

    s = sub.add_parser("configs", help="write three party configs with fresh PRF keys")
    s.add_argument("--out", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--base-port", type=int, default=47100)
    s.add_argument("--manifest", default="model.json")
    s.add_argument("--shares", default="shares")
    s.add_argument("--preproc", default="preproc")
    s.add_argument("--output", default="out")
    s.add_argument("--timeout", type=float, default=60.0)
    s.add_argument("--seed", type=int, default=None, help="derive keys from a seed (testing only)")
    s.set_defaults(fn=cmd_configs)

    s = sub.add_parser("party", help="run one party of a networked session")
    s.add_argument("--config", required=True)
    s.add_argument("--session", required=True)
    s.add_argument("--timeout", type=float, default=None)
    s.add_argument("--emit-transcript", help="write the message-size transcript as JSON")
    s.set_defaults(fn=cmd_party)

    s = sub.add_parser("reveal", help="combine the three label shares")
    s.add_argument("--shares", nargs=3, required=True)
    s.add_argument("--session", default=None)
    s.set_defaults(fn=cmd_reveal)

    def plain_inputs(s):
        s.add_argument("--video", required=True)
        s.add_argument("--indices", type=_indices, required=True)
        s.add_argument("--model", required=True, help="model manifest")
        s.add_argument("--weights", required=True)
        s.add_argument("--scores", action="store_true", help="also print aggregated scores")

    s = sub.add_parser("classify", help="run all three parties in-process")
    plain_inputs(s)
    s.add_argument("--local", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--timeout", type=float, default=120.0)
    s.add_argument("--emit-transcript")
    s.set_defaults(fn=cmd_classify)

    s = sub.add_parser("oracle", help="plaintext fixed-point reference")
    plain_inputs(s)
    s.add_argument("--float", action="store_true", help="float64 shadow instead")
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("bench", help="time a local run and report communication")
    s.add_argument("--model", default="toy", help="toy, full, or a manifest path")
    s.add_argument("--frames", type=int, default=1)
    s.add_argument("--video-frames", type=int, default=4)
    s.add_argument("--repeat", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.fn(args)
    except TransportError as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ContainerFormatError, BudgetExhaustedError, json.JSONDecodeError) as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VidMPCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
