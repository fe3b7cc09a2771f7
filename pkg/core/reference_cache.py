"""
reference_cache.py — Cache disque des solutions de référence, clé SHA256.

Format (version HAMSPLIT-REF/1) : un fichier NumPy .npz par entrée contenant
  header : chaîne JSON {magic, model_id, param_hash, h_ref, T, record_every}
  t      : temps enregistrés, forme (n,)
  z      : états enregistrés, forme (n, d)
  H      : énergie H(z) à chaque enregistrement, forme (n,)
L'écriture passe par un fichier temporaire du même répertoire puis os.replace,
de sorte qu'un lecteur concurrent ne voit jamais un fichier partiel.
"""

import hashlib
import json
import logging
import os
import tempfile
from threading import Lock
from typing import Optional

import numpy as np

from core.config import CACHE_DIR

logger = logging.getLogger(__name__)

CACHE_MAGIC = "HAMSPLIT-REF/1"


class ReferenceCache:
    """
    Stockage des trajectoires de référence.

    - Clé = SHA256(model_id | param_hash | h_ref | T | record_every)
    - Une entrée corrompue ou d'un autre format est ignorée (recalcul)
    """

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir = cache_dir or CACHE_DIR
        self._lock = Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def make_key(model_id: str, param_hash: str, h_ref: float, T: float, record_every: int) -> str:
        raw = f"{model_id}|{param_hash}|{h_ref!r}|{T!r}|{record_every}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def path_for(self, key: str) -> str:
        return os.path.join(self.cache_dir, f"ref_{key[:32]}.npz")

    def get(self, model_id: str, param_hash: str, h_ref: float, T: float, record_every: int) -> Optional[dict]:
        """Retourne {header, t, z, H} ou None si absent, corrompu ou incohérent."""
        key = self.make_key(model_id, param_hash, h_ref, T, record_every)
        path = self.path_for(key)
        if not os.path.exists(path):
            with self._lock:
                self.misses += 1
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                header = json.loads(str(data["header"]))
                entry = {
                    "header": header,
                    "t": np.array(data["t"]),
                    "z": np.array(data["z"]),
                    "H": np.array(data["H"]),
                }
        except Exception as e:
            logger.warning("Entrée de cache illisible %s (%s) : recalcul", path, e)
            with self._lock:
                self.misses += 1
            return None

        expected = {
            "magic": CACHE_MAGIC, "model_id": model_id, "param_hash": param_hash,
            "h_ref": h_ref, "T": T, "record_every": record_every,
        }
        mismatched = [k for k, v in expected.items() if header.get(k) != v]
        if mismatched or entry["z"].shape[0] != entry["t"].shape[0]:
            logger.warning("Entrée de cache incohérente %s (champs %s) : recalcul", path, mismatched)
            with self._lock:
                self.misses += 1
            return None

        with self._lock:
            self.hits += 1
        logger.debug("Cache HIT référence %s (%d enregistrements)", key[:12], entry["t"].shape[0])
        return entry

    def put(
        self,
        model_id: str,
        param_hash: str,
        h_ref: float,
        T: float,
        record_every: int,
        t: np.ndarray,
        z: np.ndarray,
        H: np.ndarray,
    ) -> str:
        """Écrit une entrée de façon atomique ; retourne le chemin du fichier."""
        key = self.make_key(model_id, param_hash, h_ref, T, record_every)
        target = self.path_for(key)
        header = json.dumps({
            "magic": CACHE_MAGIC, "model_id": model_id, "param_hash": param_hash,
            "h_ref": h_ref, "T": T, "record_every": record_every,
        })
        os.makedirs(self.cache_dir, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=self.cache_dir, suffix=".npz.tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                np.savez(f, header=np.array(header), t=np.asarray(t), z=np.asarray(z), H=np.asarray(H))
            os.replace(tmp_path, target)
        except Exception:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        logger.debug("Référence sauvegardée vers %s (%d enregistrements)", target, len(t))
        return target

    def clear(self) -> None:
        """Supprime toutes les entrées du répertoire de cache."""
        with self._lock:
            if not os.path.isdir(self.cache_dir):
                return
            for name in os.listdir(self.cache_dir):
                if name.startswith("ref_") and name.endswith(".npz"):
                    os.remove(os.path.join(self.cache_dir, name))

    def stats(self) -> dict:
        with self._lock:
            entries = 0
            if os.path.isdir(self.cache_dir):
                entries = sum(1 for n in os.listdir(self.cache_dir) if n.startswith("ref_"))
            return {"entries": entries, "hits": self.hits, "misses": self.misses, "cache_dir": self.cache_dir}


_global_cache: Optional[ReferenceCache] = None


def get_reference_cache() -> ReferenceCache:
    """Retourne l'instance globale du cache (répertoire HAMSPLIT_CACHE_DIR)."""
    global _global_cache
    if _global_cache is None:
        _global_cache = ReferenceCache()
    return _global_cache
