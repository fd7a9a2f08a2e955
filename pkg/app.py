#!/usr/bin/env python3
"""patientcode command-line entrypoint.

Runs one pipeline step per invocation:
1. synth, train-ae, encode: data generation, cross-modal autoencoders and latents.
2. train-fusion, index, search: monogram network, archive and Hamming retrieval.
3. evaluate, report: cross-validated retrieval metrics and analysis tables.

The profile is selected with --profile (lung, kidney or synth) from patientcode.json.
"""

import sys

from patientcode.cli.main import dispatch

if __name__ == "__main__":
    sys.exit(dispatch(sys.argv[1:]))
