"""Command-line surface: train a classifier on a prepared chip dataset and
serve it over the wire protocol."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .serve import ProtocolServer
from .train import TrainingRecipe, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sweepdet-bridge",
        description="CNN classifier backend for the sliding-window detector")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a prepared chip dataset")
    p_train.add_argument("--manifest", required=True,
                         help="manifest.jsonl from dataset preparation")
    p_train.add_argument("--weights", required=True,
                         help="class_weights.json from dataset preparation")
    p_train.add_argument("--model-out", required=True)
    p_train.add_argument("--probs-out", required=True,
                         help="validation probability log (calibration input)")
    p_train.add_argument("--architecture", default="tiny",
                         choices=["tiny", "resnet50", "densenet161"])
    p_train.add_argument("--initial-weights", default="none",
                         choices=["none", "imagenet"])
    p_train.add_argument("--epochs", type=int, default=2)
    p_train.add_argument("--learning-rate", type=float, default=0.0005)
    p_train.add_argument("--dropout", type=float, default=0.6)
    p_train.add_argument("--batch-size", type=int, default=16)
    p_train.add_argument("--augment", default="none", choices=["none", "flips"])
    p_train.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="serve a trained model")
    p_serve.add_argument("--model", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=9090)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging,
                      os.environ.get("SWEEPDET_LOG", "INFO").upper(),
                      logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "train":
        recipe = TrainingRecipe(
            architecture=args.architecture, weights=args.initial_weights,
            epochs=args.epochs, learning_rate=args.learning_rate,
            dropout=args.dropout, batch_size=args.batch_size,
            augment=args.augment, seed=args.seed)
        try:
            result = train(args.manifest, args.weights, recipe,
                           args.model_out, args.probs_out)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"validation accuracy: {result.validation_accuracy:.4f}")
        print(f"model: {args.model_out}")
        print(f"probability log: {args.probs_out}")
        return 0

    if args.command == "serve":
        try:
            server = ProtocolServer(args.model, host=args.host, port=args.port)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"serving on {server.endpoint}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.stop()
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
