"""Launch the scoring service."""

from __future__ import annotations

import argparse


def main() -> None:
    parser = argparse.ArgumentParser(description="masked-prompt scoring service")
    parser.add_argument("--model", required=True,
                        help="model identifier or local path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--baseline-mode", default="unk-token",
                        choices=["unk-token", "vocab-mean"])
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--port", type=int, default=8301)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args()

    import uvicorn

    from .app import create_app
    from .config import ServerConfig

    config = ServerConfig(
        model=args.model, device=args.device, baseline_mode=args.baseline_mode,
        batch_size=args.batch_size, port=args.port,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
