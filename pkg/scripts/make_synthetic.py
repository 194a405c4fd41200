"""Write a synthetic scene container for smoke tests of the CLI."""

import argparse
import dataclasses

from hsicompress.data import SyntheticConfig, make_synthetic_scene, save_container


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out_dir")
    p.add_argument("--name", default="synthetic")
    for f in dataclasses.fields(SyntheticConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    args = p.parse_args(argv)
    cfg = SyntheticConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(SyntheticConfig)})
    print(save_container(make_synthetic_scene(cfg, args.name), args.out_dir, args.name))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
