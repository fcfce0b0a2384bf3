"""
Synthesising training data offline
==================================

The data pipeline grows seed domains into topics and sentences, then asks a
data model to inject a random recipe of errors into each sentence and
annotate them. Here an offline stand-in plays the data model; every call is
recorded to a cassette, so a second run replays it byte for byte.
"""
import tempfile
from pathlib import Path

from diageval import datagen
from diageval.gateway import Cassette, Gateway
from diageval.mock import MockDataModel

###############################################################################
# An error recipe
# ---------------
# 1-5 errors, each with a uniformly chosen error type and severity.

recipe = datagen.sample_error_recipe(datagen.derive_seed(42, "recipe", 0))
for etype, severity in recipe.errors:
    print(f"{severity.value:5}  {etype.category} / {etype.name}")
print()
print(datagen.build_injection_prompt("The ferry leaves every hour from the north pier.",
                                     recipe))

###############################################################################
# Recording a small run
# ---------------------

cassette = Path(tempfile.mkdtemp()) / "datagen.jsonl"
gw = Gateway("record", Cassette.load(cassette), {"datagen": MockDataModel()})
domains = datagen.generate_domains(gw, count=3)
topics = datagen.generate_topics(gw, domains, count=2)
sentences = datagen.generate_sentences(gw, [t for d in domains for t in topics[d]], seed=42)
records, manifest = datagen.synthesize(gw, [s["raw_text"] for s in sentences], seed=42)
gw.save()
print(manifest["counts"])

example = datagen.to_finetune_record(records[0])
print(example["input"])
print(example["target"])

###############################################################################
# Replaying it
# ------------
# No transport is configured in replay mode; answers come from the cassette.

replay = Gateway("replay", Cassette.load(cassette))
again, _ = datagen.synthesize(replay, [s["raw_text"] for s in sentences], seed=42)
print("identical:", again == records)
