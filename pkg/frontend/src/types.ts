/** Response shapes of the review API (see docs/api/*.schema.json). */

export const FILE_FORMATS = [
  "DICOM",
  "NIFTI1",
  "JPEG",
  "PNG",
  "ZIP",
  "GZIP",
  "TAR",
  "UNKNOWN",
] as const;

export const FILE_STATUSES = ["LATEST", "OLD", "DELETED"] as const;

export type FileStatus = (typeof FILE_STATUSES)[number];

export interface Machine {
  username: string;
  mac: string;
  paths: string[];
  formats: string[];
  scan_frequency: number;
  last_scanned: string | null;
  stale: boolean;
}

export interface FileRecord {
  record_id: string;
  mac: string;
  filepath: string;
  format: string;
  file_hash: string;
  meta_hash: string;
  pixel_hash: string;
  version: number;
  status: FileStatus;
  last_modified: string;
  last_scanned: string;
}

export interface Reminder {
  id: string;
  username: string;
  mac: string;
  created_at: string;
  note: string;
  delivered: boolean;
}

export interface Summary {
  machines: number;
  stale_machines: number;
  files_latest: number;
  files_deleted: number;
  last_scan_time: string | null;
}

export interface ErrorBody {
  detail: string;
  field?: string;
}
