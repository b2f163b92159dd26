/**
 * Manifest records in the exchange format: UTF-8 JSON lines, one record
 * per line, with keys id/class/feature/prob/split plus an optional pred
 * (the predicted class, written for test splits).
 */

export interface ManifestRecord {
  id: string;
  class: string;
  feature: string;
  prob: number;
  split: 'train' | 'test';
  pred?: string;
}

export function manifestToJsonl(records: ManifestRecord[]): string {
  return records
    .map(rec => {
      const obj: Record<string, unknown> = {
        id: rec.id,
        class: rec.class,
        feature: rec.feature,
        prob: rec.prob,
        split: rec.split,
      };
      if (rec.pred !== undefined) obj.pred = rec.pred;
      return JSON.stringify(obj);
    })
    .map(line => line + '\n')
    .join('');
}
