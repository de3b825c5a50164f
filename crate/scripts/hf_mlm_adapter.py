#!/usr/bin/env python3
"""Line-delimited JSON adapter exposing a Hugging Face masked LM to rcprobe.

Protocol: one JSON request per line on stdin, one JSON reply per line on
stdout. See crates/core/src/backends/subprocess.rs for the message table.
"""

import base64
import json
import os
import sys

MASK = "[MASK]"


def b64_f32(array):
    import numpy as np

    return base64.b64encode(np.ascontiguousarray(array, dtype="<f4").tobytes()).decode("ascii")


class Adapter:
    def __init__(self):
        self.tok = None
        self.model = None

    def init(self, req):
        if req.get("cache_dir"):
            os.environ.setdefault("HF_HOME", req["cache_dir"])
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.torch = torch
        ckpt = req["checkpoint"]
        rev = req.get("revision") or None
        self.tok = AutoTokenizer.from_pretrained(ckpt, revision=rev)
        self.model = AutoModelForMaskedLM.from_pretrained(ckpt, revision=rev)
        self.model.eval()
        self.device = req.get("device") or "cpu"
        self.model.to(self.device)
        torch.manual_seed(0)
        vocab = []
        for i in range(len(self.tok)):
            piece = self.tok.convert_ids_to_tokens(i)
            surface = self.tok.convert_tokens_to_string([piece]).strip()
            vocab.append(surface if surface else piece)
        cfg = self.model.config
        return {
            "num_layers": cfg.num_hidden_layers,
            "hidden_size": cfg.hidden_size,
            "tokenizer": self.tok.name_or_path,
            "vocab": vocab,
        }

    def _encode(self, text):
        text = text.replace(MASK, self.tok.mask_token)
        enc = self.tok(text, return_tensors="pt", return_offsets_mapping=True,
                       return_special_tokens_mask=True)
        offsets = enc.pop("offset_mapping")[0].tolist()
        special = enc.pop("special_tokens_mask")[0].tolist()
        ids = enc["input_ids"][0].tolist()
        spans = []
        start = None
        for i, ch in enumerate(text):
            if ch.isspace():
                if start is not None:
                    spans.append((start, i))
                    start = None
            elif start is None:
                start = i
        if start is not None:
            spans.append((start, len(text)))
        word_ids = []
        for (s, e), sp in zip(offsets, special):
            if sp:
                word_ids.append(None)
                continue
            # Skip a leading space some BPE offsets include.
            while s < e and text[s].isspace():
                s += 1
            word_ids.append(next((w for w, (a, b) in enumerate(spans) if a <= s < b), None))
        mask_positions = [i for i, t in enumerate(ids) if t == self.tok.mask_token_id]
        if len(mask_positions) > 1:
            raise ValueError("expected at most one mask, found %d" % len(mask_positions))
        meta = {
            "pieces": self.tok.convert_ids_to_tokens(ids),
            "special_mask": [bool(s) for s in special],
            "word_ids": word_ids,
            "mask_position": mask_positions[0] if mask_positions else None,
        }
        return enc, meta

    def tokenize(self, req):
        return self._encode(req["text"])[1]

    def embed(self, req):
        enc, meta = self._encode(req["text"])
        with self.torch.no_grad():
            out = self.model(**{k: v.to(self.device) for k, v in enc.items()},
                             output_hidden_states=True)
        meta["layers"] = [b64_f32(h[0].float().cpu().numpy()) for h in out.hidden_states]
        return meta

    def predict(self, req):
        enc, meta = self._encode(req["text"])
        if meta["mask_position"] is None:
            raise ValueError("no mask token in input")
        with self.torch.no_grad():
            out = self.model(**{k: v.to(self.device) for k, v in enc.items()})
        logits = out.logits[0, meta["mask_position"]].double()
        probs = self.torch.softmax(logits, dim=-1).cpu().numpy()
        return {"probs": b64_f32(probs)}

    def word_pieces(self, req):
        base = self.tok.tokenize("a")
        full = self.tok.tokenize("a " + req["word"])
        return {"count": len(full) - len(base)}


def main():
    adapter = Adapter()
    handlers = {
        "init": adapter.init,
        "tokenize": adapter.tokenize,
        "embed": adapter.embed,
        "predict": adapter.predict,
        "word_pieces": adapter.word_pieces,
    }
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "shutdown":
                break
            reply = handlers[op](req)
            reply["ok"] = True
        except Exception as exc:  # report every failure to the caller
            reply = {"ok": False, "error": "%s: %s" % (type(exc).__name__, exc)}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
