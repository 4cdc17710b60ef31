"""Command-line pipeline: gen-dataset, train, sample, eval, export.

Flags override config-file keys (plain ``key = value`` lines, UTF-8, ``#``
comments). Every run logs its fully resolved configuration to stderr.
Primary outputs are byte-identical across reruns with the same config.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dataset as ds
from . import metrics, model as model_mod, qasm, sampler as sampler_mod
from .circuit import Circuit, CircuitError, circuit_from_text, circuit_to_text
from .gates import GATESET_IDS

log = logging.getLogger("qfusion")

SAMPLE_MAGIC = "QFSMP v1"


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError("config-parse", f"{path}:{lineno}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _config_path_from_argv(argv: list[str]) -> str | None:
    for k, arg in enumerate(argv):
        if arg == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config_file(argv: list[str], subparsers: dict[str, argparse.ArgumentParser]) -> None:
    """Install config-file values as subparser defaults; flags still win."""
    path = _config_path_from_argv(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if path is None or command not in subparsers:
        return
    values = _read_config_file(path)
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    unknown = sorted(k for k in values if k not in actions)
    if unknown:
        raise CliError("config-key", f"unknown config keys: {', '.join(unknown)}")
    typed = {}
    for key, raw in values.items():
        action = actions[key]
        value = action.type(raw) if action.type else raw
        if action.choices and value not in action.choices:
            raise CliError("config-value", f"{key}: {raw!r} not in {sorted(action.choices)}")
        typed[key] = value
        action.required = False
    sub.set_defaults(**typed)


def _log_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    log.info("resolved config: %s", resolved)


def _parse_qubits(raw: str) -> tuple[int, ...]:
    parts = raw.replace("-", ":").split(":")
    if len(parts) == 2 and raw.count("-") == 1:
        lo, hi = int(parts[0]), int(parts[1])
        return tuple(range(lo, hi + 1))
    return tuple(int(p) for p in raw.split(","))


def cmd_gen_dataset(args) -> int:
    spec = ds.DatasetSpec(
        gateset_id=args.gateset,
        qubit_counts=_parse_qubits(args.qubits),
        gates_per_circuit=args.gates,
        num_samples=args.samples,
        seed=args.seed,
    )
    count = ds.build_dataset(spec, args.out)
    log.info("wrote %d records to %s", count, args.out)
    return 0


def cmd_train(args) -> int:
    records, gateset_id, _ = ds.load_dataset(args.dataset)
    log.info("loaded %d records (%s) from %s", len(records), gateset_id, args.dataset)
    config = model_mod.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        diffusion_steps=args.steps,
        encoder=model_mod.EncoderConfig(
            hidden_dim=args.hidden_dim, message_rounds=args.message_rounds
        ),
    )
    model = model_mod.train(records, config, seed=args.seed)
    model_mod.save_checkpoint(model, args.out)
    loss_log = Path(args.out).with_suffix(".loss.txt")
    with open(loss_log, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch size node edge total\n")
        for epoch, row in enumerate(model.metadata["loss_history"]):
            fh.write(
                f"{epoch} {row['size']!r} {row['node']!r} {row['edge']!r} {row['total']!r}\n"
            )
    log.info("checkpoint -> %s, loss log -> %s", args.out, loss_log)
    return 0


def cmd_sample(args) -> int:
    model = model_mod.load_checkpoint(args.checkpoint)
    config = sampler_mod.SamplerConfig(
        mode=args.mode,
        edge_mode=args.edge_mode,
        max_layers=args.max_layers,
        num_qubits=args.qubits if args.qubits else None,
        seed=args.seed,
    )
    results = sampler_mod.sample_circuits(model, config, args.count)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{SAMPLE_MAGIC} gateset={model.gateset_id} seed={args.seed} count={len(results)}\n"
        )
        for res in results:
            if res.circuit is not None:
                fh.write(f"ok {circuit_to_text(res.circuit)}\n")
            else:
                rule = res.report.violations[0].rule if res.report.violations else "unknown"
                fh.write(f"invalid {rule}\n")
    n_valid = sum(r.report.is_valid for r in results)
    log.info("sampled %d circuits (%d valid) -> %s", len(results), n_valid, args.out)
    if args.qasm_dir:
        out_dir = Path(args.qasm_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for k, res in enumerate(results):
            if res.circuit is not None:
                (out_dir / f"circuit_{k:05d}.qasm").write_text(
                    qasm.export_qasm(res.circuit), encoding="utf-8"
                )
    return 0


def _load_circuit_lines(path: str) -> list[Circuit | None]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CliError("file-format", f"{path}: empty file")
    batch: list[Circuit | None] = []
    if lines[0].startswith(SAMPLE_MAGIC):
        gateset_id = lines[0].split("gateset=")[1].split()[0]
        for lineno, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            tag, _, rest = line.partition(" ")
            if tag == "ok":
                try:
                    batch.append(circuit_from_text(rest, gateset_id))
                except CircuitError as exc:
                    raise CliError("file-format", f"{path}:{lineno}: {exc}") from None
            elif tag == "invalid":
                batch.append(None)
            else:
                raise CliError("file-format", f"{path}:{lineno}: bad line tag {tag!r}")
    elif lines[0].startswith("QFDS"):
        records, _, _ = ds.load_dataset(path)
        batch.extend(r.circuit for r in records)
    else:
        raise CliError("file-format", f"{path}: unrecognized file header")
    return batch


def cmd_eval(args) -> int:
    batch = _load_circuit_lines(args.circuits)
    options = metrics.EvalOptions(
        num_pairs=args.expr_pairs, num_bins=args.expr_bins, seed=args.seed
    )
    report = metrics.evaluate_run(batch, options)
    text = metrics.render_text(report)
    Path(args.out).write_text(text, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(metrics.render_csv(report), encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_export(args) -> int:
    batch = [c for c in _load_circuit_lines(args.circuits) if c is not None]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, circuit in enumerate(batch):
        (out_dir / f"circuit_{k:05d}.qasm").write_text(
            qasm.export_qasm(circuit), encoding="utf-8"
        )
    log.info("exported %d circuits to %s", len(batch), out_dir)
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="qfusion", description="Diffusion-based quantum circuit generator pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    def add_parser(name, **kwargs):
        registry[name] = sub.add_parser(name, **kwargs)
        return registry[name]

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", type=str, default=None, help="key=value config file")

    p = add_parser("gen-dataset", help="generate a random-circuit dataset file")
    p.add_argument("--gateset", choices=GATESET_IDS, default="heron_np")
    p.add_argument("--qubits", type=str, default="2", help="e.g. 2 or 1-5 or 2,3")
    p.add_argument("--gates", type=int, default=8)
    p.add_argument("--samples", type=int, default=600)
    p.add_argument("--out", type=str, required=True)
    add_common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = add_parser("train", help="train a model on a dataset file")
    p.add_argument("--dataset", type=str, required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=32, help="diffusion steps")
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--message-rounds", type=int, default=2)
    p.add_argument("--out", type=str, required=True)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = add_parser("sample", help="sample circuits from a checkpoint")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--mode", choices=(sampler_mod.WIRE_HEAD, sampler_mod.WIRE_FREE),
                   default=sampler_mod.WIRE_HEAD)
    p.add_argument("--edge-mode", choices=(sampler_mod.CONSTRAINED, sampler_mod.FREE),
                   default=sampler_mod.CONSTRAINED)
    p.add_argument("--max-layers", type=int, default=64)
    p.add_argument("--qubits", type=int, default=0, help="0 = model default")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--qasm-dir", type=str, default=None)
    add_common(p)
    p.set_defaults(func=cmd_sample)

    p = add_parser("eval", help="evaluate a sample or dataset file")
    p.add_argument("--circuits", type=str, required=True)
    p.add_argument("--expr-pairs", type=int, default=1000)
    p.add_argument("--expr-bins", type=int, default=75)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--csv", type=str, default=None)
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = add_parser("export", help="export circuits to OpenQASM 2 files")
    p.add_argument("--circuits", type=str, required=True)
    p.add_argument("--out", type=str, required=True, help="output directory")
    add_common(p)
    p.set_defaults(func=cmd_export)
    return parser, registry


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        _apply_config_file(argv, subparsers)
        args = parser.parse_args(argv)
        _log_config(args)
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc.code}: {exc}\n")
        return 2
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
