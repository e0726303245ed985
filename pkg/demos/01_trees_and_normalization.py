"""Bracketed trees, label inventories, and POS-node normalization.

Treebanks in this toolkit are plain text: one Penn-style bracketed tree per
line.  Labels live in a partitioned inventory (constituent roles vs POS
tags), and corpora converted from other annotation schemes often leave POS
tags above internal nodes; normalization splices those out.
"""

from spskit import (
    LabelInventory,
    normalize_pos_nodes,
    parse_bracketed,
    serialize,
)

# A small inventory: "adv" is a constituent role, "t" and "w" are POS tags.
inventory = LabelInventory(sps_labels={"adv"}, pos_labels={"t", "w"})

# This tree carries a redundant POS node: the outer (t ...) dominates two
# internal nodes instead of a token.
messy = parse_bracketed("(adv (t (t 昨天) (t 晚上)) (w ，))", inventory=inventory)
print("before:", serialize(messy))

clean = normalize_pos_nodes(messy, inventory)
print("after: ", serialize(clean))
assert serialize(clean) == "(adv (t 昨天) (t 晚上) (w ，))"

# Normalization is idempotent and never touches the token sequence.
assert normalize_pos_nodes(clean, inventory) == clean
assert clean.leaves() == messy.leaves()

# Serialization round-trips: a treebank written to disk parses back
# structurally identical.
assert parse_bracketed(serialize(clean)) == clean

# Unknown labels are load errors, reported with the offending names.
try:
    parse_bracketed("(adv (zz 昨天))", inventory=inventory)
except Exception as error:
    print("rejected:", error)
