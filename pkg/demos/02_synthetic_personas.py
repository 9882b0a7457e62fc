"""Synthetic talking identities
================================

Each persona is a deterministic audio-to-expression mapping derived
from a seed. A forged clip reuses the target's audio content but
renders the expressions with a different persona's mapping -- the
feature-level analogue of a face swap.
"""

import numpy as np

from exprauth import forge_clip, generate_persona, synthesize_clip

target = generate_persona(0)
actor = generate_persona(1)

genuine = synthesize_clip(target, audio_seed=42, L=100)
fake = forge_clip(target, actor, audio_seed=42, L=100)

print(f"genuine clip: {genuine.clip_id}  fake={genuine.is_fake}")
print(f"forged clip:  {fake.clip_id}  fake={fake.is_fake}")

# the forgery shares the audio track exactly ...
print("audio identical:", np.array_equal(genuine.audio, fake.audio))

# ... but moves the expressions; the gap dwarfs the per-clip noise floor
gap = np.linalg.norm(genuine.expressions - fake.expressions)
noise_floor = target.noise_level * np.sqrt(genuine.expressions.size)
print(f"expression gap {gap:.1f} vs noise floor {noise_floor:.1f}")

# forging a persona with itself is a no-op, which pins down that only
# the identity (not the content) differs between the two clips
self_forge = forge_clip(target, target, audio_seed=42, L=100)
print("self-forgery == genuine:",
      np.array_equal(self_forge.expressions, genuine.expressions))
