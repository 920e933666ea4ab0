"""surgassist: surgical assistant skeleton.

Library layers:

- ``surgassist.mop`` -- sparse mixture-of-projectors alignment layer
  (forward, exact backward, toy trainer, checkpoints).
- ``surgassist.protocol`` -- Thinking/Calling/Replying wire format, parser,
  and the function-calling dataset generator.
- ``surgassist.functions`` -- surgical function registry with fixture-backed
  and remote implementations, plus the RLE mask codec.
- ``surgassist.orchestrator`` -- one-or-two-round dispatch engine over a
  pluggable model backend.
- ``surgassist.evaluation`` -- SR / KeyHit / Rej / BLEU@4 / mIoU metrics and
  the sweep drivers.
- ``surgassist.service`` -- HTTP service; ``surgassist.cli`` -- command line.
"""

__version__ = "0.1.0"
