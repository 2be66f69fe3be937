from commands import describe, evaluate, extract, ingest, remedy, score, synth, train

COMMANDS = [extract, ingest, synth, train, score, evaluate, remedy, describe]
