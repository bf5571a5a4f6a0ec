"""From network weights to a human-readable formula.

Builds a tiny network by hand so the expected formula is known, then walks
through extraction: every hidden unit becomes a subexpression, the algebra
layer folds constants and merges terms, and the result prints as text,
infix with 4-decimal coefficients, or JSON.
"""

import json

import numpy as np

from eqldiv import expressions
from eqldiv.extract import extract
from eqldiv.network import Architecture, build

# Architecture: 2 inputs -> 6 unary units (2 id, 2 sin, 2 cos) and
# 2 product units -> one division output.
arch = Architecture(n_in=2, n_out=1, depth=2, u=6, v=2)
net = build(arch, seed=0)
for w in net.weights:
    w[:] = 0.0
for b in net.biases:
    b[:] = 0.0

# First sin unit sees pi*x1; first identity unit sees x2.
net.weights[0][2, 0] = np.pi  # sin block starts at row u/3
net.weights[0][0, 1] = 1.0
# Output: numerator = 2*sin(pi*x1), denominator = x2 + 1.5
net.weights[1][0, 2] = 2.0
net.weights[1][1, 0] = 1.0
net.biases[1][1] = 1.5

exprs = extract(net)
print("extracted:", expressions.render(exprs[0]))

# The tree also serializes to JSON for downstream tools, and parses back.
tree = json.loads(expressions.to_json(exprs[0]))
print("\nJSON form:")
print(json.dumps(tree, indent=2)[:400])

text = expressions.render(exprs[0])
reparsed = expressions.parse(text)
print("\nrender -> parse -> render is stable:",
      expressions.render(reparsed) == text)

# Rendered formula and network agree numerically away from the division cut.
X = np.random.default_rng(0).uniform(-1, 1, size=(5, 2))
from eqldiv.network import forward
pred, _ = forward(net, X)
sym = expressions.evaluate(exprs[0], X)
print("max |network - formula| on 5 probes:",
      float(np.max(np.abs(pred[:, 0] - sym))))
