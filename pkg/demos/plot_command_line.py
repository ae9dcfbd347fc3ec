"""
Model files and the command line
================================

Models are JSON documents. The ``riskctmdp`` command validates, solves,
simulates and cross-checks them; here it is driven through its ``main``
function so the script is self-contained.
"""

import json
import tempfile
from pathlib import Path

from riskctmdp.cli import main

work = Path(tempfile.mkdtemp())
model = work / "rat.json"

# %%
# Write the built-in example and look at part of it.
main(["example", "rat", "--mu", "2", "--l", "1", "--p", "0.5", "--C", "0.1",
      "--out", str(model)])
doc = json.loads(model.read_text())
print({k: doc[k] for k in ("n_states", "gradual_actions", "impulse_actions", "w")})

# %%
main(["validate", str(model)])

# %%
# Exit code 0 means solved with every state finite.
code = main(["solve", str(model)])
print("exit code", code)

# %%
main(["compare", str(model), "--paths", "20000", "--seed", "2"])
