/** Aggregation helpers for seed-replicated experiment rows. */

export interface Aggregate {
  n: number;
  mean: number;
  /** Sample standard deviation (n - 1 denominator); 0 for a single value. */
  std: number;
}

export function mean(values: number[]): number {
  if (values.length === 0) {
    throw new Error('mean of empty sample');
  }
  let total = 0;
  for (const v of values) total += v;
  return total / values.length;
}

export function sampleStd(values: number[]): number {
  if (values.length < 2) return 0;
  const m = mean(values);
  let ss = 0;
  for (const v of values) ss += (v - m) * (v - m);
  return Math.sqrt(ss / (values.length - 1));
}

export function aggregate(values: number[]): Aggregate {
  return { n: values.length, mean: mean(values), std: sampleStd(values) };
}

/** Least-squares scale c minimising sum (y_i - c * x_i)^2. */
export function fitScale(x: number[], y: number[]): number {
  if (x.length !== y.length || x.length === 0) {
    throw new Error('fitScale needs matching nonempty samples');
  }
  let xy = 0;
  let xx = 0;
  for (let i = 0; i < x.length; i++) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
  }
  if (xx === 0) return 0;
  return xy / xx;
}

/** Group rows by a key function and aggregate one numeric column. */
export function groupAggregate<T>(
  rows: T[],
  key: (row: T) => string,
  value: (row: T) => number,
): Map<string, Aggregate> {
  const buckets = new Map<string, number[]>();
  for (const row of rows) {
    const k = key(row);
    const bucket = buckets.get(k);
    if (bucket) {
      bucket.push(value(row));
    } else {
      buckets.set(k, [value(row)]);
    }
  }
  const out = new Map<string, Aggregate>();
  for (const [k, values] of buckets) out.set(k, aggregate(values));
  return out;
}
