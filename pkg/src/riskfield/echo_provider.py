"""Stand-in external perception provider.

Reads a request from the work directory given as its last argument, renders
ground-truth detections from the shared scene geometry and answers through
``response.json``.  Useful for exercising the file protocol end to end:

    riskfield run --scenario scenario1 --provider external \\
        --endpoint "python -m riskfield.echo_provider"
"""

from __future__ import annotations

import argparse
import sys
from types import SimpleNamespace

from .perception import PerceptionRequest, PerceptionResponse, ProtocolError, oracle_perceive


def answer(workdir, mask_format: str = "pgm") -> None:
    request = PerceptionRequest.read(workdir)
    if request.hazards is None:
        raise ProtocolError("echo provider needs scene geometry in the request")
    dets = oracle_perceive(SimpleNamespace(hazards=request.hazards), request.camera, request.state)
    PerceptionResponse(request.camera.width, request.camera.height, tuple(dets)).write(
        workdir, mask_format
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="riskfield-echo-provider", description=__doc__.splitlines()[0])
    parser.add_argument("--rle", action="store_true", help="encode masks as RLE instead of PGM files")
    parser.add_argument("workdir")
    args = parser.parse_args(argv)
    try:
        answer(args.workdir, "rle" if args.rle else "pgm")
    except ProtocolError as exc:
        print(f"echo provider: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
